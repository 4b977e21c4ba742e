#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <unsupported/Eigen/KroneckerProduct>

#include "spinmachine/quantumstate.hpp"
#include "spinmachine/spinchain.hpp"
#include "spinmachine/types.hpp"

namespace spinmachine {

using SparseOp = Eigen::SparseMatrix<cplx>;

enum class StrokeMode { FourStroke, TwoStroke };

inline const char* to_string(StrokeMode m) { return m == StrokeMode::FourStroke ? "four-stroke" : "two-stroke"; }

struct CycleConfig {
    double beta1 = 1.0;
    double beta2 = 1.0;
    double tau1 = 1.0;
    double tau2 = 1.0;
    StrokeMode mode = StrokeMode::FourStroke;

    // In two-stroke mode the single evolution time is tau1.
    double second_evolution() const { return mode == StrokeMode::TwoStroke ? 0.0 : tau2; }

    void validate() const {
        if (!(beta1 >= 0.0) || !(beta2 >= 0.0)) throw DomainError("CycleConfig: beta must be >= 0");
        if (!std::isfinite(tau1) || !std::isfinite(tau2) || tau1 < 0.0 || tau2 < 0.0)
            throw DomainError("CycleConfig: durations must be finite and >= 0");
    }
};

enum class Site { A, B };

// Per-sector eigen-decomposition of a Hamiltonian that is block diagonal on
// the given partition of basis indices.
struct SpectralData {
    std::vector<IndexList> sectors;
    std::vector<RVec> energies;
    std::vector<Mat> vectors;
    int dim = 0;
};

inline SpectralData diagonalize(const Mat& h, std::vector<IndexList> sectors) {
    SpectralData out;
    out.dim = static_cast<int>(h.rows());
    for (const auto& idx : sectors) {
        if (idx.empty()) continue;
        Mat block = h(idx, idx);
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (block + block.adjoint()));
        out.sectors.push_back(idx);
        out.energies.push_back(es.eigenvalues());
        out.vectors.push_back(es.eigenvectors());
    }
    return out;
}

// Unitary stored as one dense block per invariant sector.
struct SectorUnitary {
    std::shared_ptr<const std::vector<IndexList>> sectors;
    std::vector<Mat> blocks;
    int dim = 0;

    Mat apply(const Mat& rho) const {
        const auto& sec = *sectors;
        Mat out = Mat::Zero(dim, dim);
        for (std::size_t n = 0; n < sec.size(); ++n)
            for (std::size_t m = 0; m < sec.size(); ++m) {
                Mat sub = rho(sec[n], sec[m]);
                if (sub.cwiseAbs().maxCoeff() == 0.0) continue;
                out(sec[n], sec[m]) = blocks[n] * sub * blocks[m].adjoint();
            }
        return out;
    }

    Mat dense() const {
        const auto& sec = *sectors;
        Mat u = Mat::Zero(dim, dim);
        for (std::size_t n = 0; n < sec.size(); ++n) u(sec[n], sec[n]) = blocks[n];
        return u;
    }
};

inline SectorUnitary evolution_operator(const SpectralData& sd, double tau) {
    SectorUnitary u;
    u.sectors = std::make_shared<const std::vector<IndexList>>(sd.sectors);
    u.dim = sd.dim;
    for (std::size_t n = 0; n < sd.sectors.size(); ++n) {
        Vec phase = (sd.energies[n].cast<cplx>() * cplx(0.0, -tau)).array().exp();
        u.blocks.push_back(sd.vectors[n] * phase.asDiagonal() * sd.vectors[n].adjoint());
    }
    return u;
}

inline SparseOp to_sparse(const Mat& m) { return m.sparseView(); }

// Hamiltonian together with the local and coupling terms used by the heat and
// work bookkeeping, plus its cached spectral decomposition.
struct WorkingFluid {
    Hamiltonian H;
    double E1 = 0.0;
    double EN = 0.0;
    SparseOp H_AC;
    SparseOp H_CB;
    SpectralData spectrum;

    int N() const { return H.site_count; }
    int dim() const { return H.dim(); }
    SectorUnitary unitary(double tau) const { return evolution_operator(spectrum, tau); }
};

using FluidPtr = std::shared_ptr<const WorkingFluid>;

inline FluidPtr make_fluid(const ChainSpec& spec) {
    auto f = std::make_shared<WorkingFluid>();
    f->H = build_hamiltonian(spec);
    f->E1 = spec.E.front();
    f->EN = spec.E.back();
    f->H_AC = to_sparse(bond_hamiltonian(spec, 1));
    f->H_CB = to_sparse(bond_hamiltonian(spec, spec.N() - 1));
    f->spectrum = diagonalize(f->H.matrix, sectors_by_popcount(spec.N()));
    return f;
}

inline FluidPtr make_fluid(const NoSymPairSpec& spec) {
    auto f = std::make_shared<WorkingFluid>();
    f->H = build_nosym_hamiltonian(spec);
    f->E1 = spec.E1;
    f->EN = spec.E2;
    f->H_AC = to_sparse(nosym_coupling(spec));
    f->H_CB = f->H_AC;
    IndexList all{0, 1, 2, 3};
    f->spectrum = f->H.conserves_magnetization ? diagonalize(f->H.matrix, sectors_by_popcount(2))
                                               : diagonalize(f->H.matrix, {all});
    return f;
}

inline double sparse_expectation(const SparseOp& op, const Mat& rho) {
    cplx v = 0.0;
    for (int k = 0; k < op.outerSize(); ++k)
        for (SparseOp::InnerIterator it(op, k); it; ++it) v += it.value() * rho(it.col(), it.row());
    return v.real();
}

// ---- tensor plumbing on raw matrices, first factor = most significant bit ----

inline Mat kron_front(const Mat& site, const Mat& rest) { return Eigen::kroneckerProduct(site, rest).eval(); }

inline Mat kron_back(const Mat& rest, const Mat& site) { return Eigen::kroneckerProduct(rest, site).eval(); }

inline Mat trace_front(const Mat& rho) {
    const Eigen::Index d = rho.rows() / 2;
    return rho.topLeftCorner(d, d) + rho.bottomRightCorner(d, d);
}

inline Mat trace_back(const Mat& rho) {
    const Eigen::Index d = rho.rows() / 2;
    using Strided = Eigen::Map<const Mat, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;
    const Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic> stride(4 * d, 2);
    return Strided(rho.data(), d, d, stride) + Strided(rho.data() + 2 * d + 1, d, d, stride);
}

inline Mat reduce_to_front_site(Mat rho) {
    while (rho.rows() > 2) rho = trace_back(rho);
    return rho;
}

inline Mat reduce_to_back_site(Mat rho) {
    while (rho.rows() > 2) rho = trace_front(rho);
    return rho;
}

// ---- strokes ----

inline DensityMatrix thermalize_stroke(const DensityMatrix& rho, Site site, double beta, double E) {
    const IndexList& s = rho.sites;
    if (s.size() < 2) throw DomainError("thermalize_stroke: need at least two sites");
    if (site == Site::A) {
        return {kron_front(local_gibbs(E, beta).matrix, trace_front(rho.matrix)), s};
    }
    return {kron_back(trace_back(rho.matrix), local_gibbs(E, beta).matrix), s};
}

inline DensityMatrix unitary_stroke(const DensityMatrix& rho, const Hamiltonian& h, double tau) {
    if (h.dim() != rho.dim()) throw DomainError("unitary_stroke: dimension mismatch");
    if (tau == 0.0) return rho;
    std::vector<IndexList> sectors = h.conserves_magnetization ? sectors_by_popcount(h.site_count)
                                                               : std::vector<IndexList>{site_range(0, h.dim() - 1)};
    const SectorUnitary u = evolution_operator(diagonalize(h.matrix, sectors), tau);
    return {u.apply(rho.matrix), rho.sites};
}

// ---- channels ----

enum class Target { CB, AC, C };

inline const char* to_string(Target t) {
    switch (t) {
        case Target::CB: return "CB";
        case Target::AC: return "AC";
        default: return "C";
    }
}

struct ChannelHandle {
    Target target = Target::CB;
    CycleConfig config;
    FluidPtr fluid;
    Mat bath_A;
    Mat bath_B;
    SectorUnitary U1;
    SectorUnitary U2;

    int N() const { return fluid->N(); }

    IndexList sites() const {
        switch (target) {
            case Target::CB: return site_range(2, N());
            case Target::AC: return site_range(1, N() - 1);
            default: return site_range(2, N() - 1);
        }
    }

    int subsystem_sites() const { return static_cast<int>(sites().size()); }
    int dim() const { return 1 << subsystem_sites(); }
};

inline ChannelHandle make_channel(FluidPtr fluid, const CycleConfig& config, Target target, const Mat& bath_A,
                                  const Mat& bath_B) {
    config.validate();
    ChannelHandle h;
    h.target = target;
    h.config = config;
    h.fluid = std::move(fluid);
    h.bath_A = bath_A;
    h.bath_B = bath_B;
    h.U1 = h.fluid->unitary(config.tau1);
    h.U2 = h.fluid->unitary(target == Target::C ? 0.0 : config.second_evolution());
    return h;
}

inline ChannelHandle make_channel(FluidPtr fluid, const CycleConfig& config, Target target) {
    const Mat ga = local_gibbs(fluid->E1, config.beta1).matrix;
    const Mat gb = local_gibbs(fluid->EN, config.beta2).matrix;
    return make_channel(std::move(fluid), config, target, ga, gb);
}

inline Mat apply_channel_matrix(const ChannelHandle& h, const Mat& rho) {
    if (rho.rows() != h.dim() || rho.cols() != h.dim())
        throw DomainError(std::string("apply_channel: state does not live on target ") + to_string(h.target));
    switch (h.target) {
        case Target::CB: {
            Mat x = h.U1.apply(kron_front(h.bath_A, rho));
            x = h.U2.apply(kron_back(trace_back(x), h.bath_B));
            return trace_front(x);
        }
        case Target::AC: {
            Mat x = h.U2.apply(kron_back(rho, h.bath_B));
            x = h.U1.apply(kron_front(h.bath_A, trace_front(x)));
            return trace_back(x);
        }
        default: {
            Mat x = h.U1.apply(kron_back(kron_front(h.bath_A, rho), h.bath_B));
            return trace_back(trace_front(x));
        }
    }
}

inline DensityMatrix apply_channel(const ChannelHandle& h, const DensityMatrix& rho) {
    if (rho.sites != h.sites())
        throw DomainError(std::string("apply_channel: state does not live on target ") + to_string(h.target));
    return {apply_channel_matrix(h, rho.matrix), rho.sites};
}

struct KrausOperator {
    Mat R;
    int i = 0;        // bath-A input level (0 = down)
    int j = 0;        // bath-B input level
    int i_out = 0;    // traced level of the first traced site
    int j_out = 0;    // traced level of the second traced site
};

// Kraus operators for diagonal bath states; zero-weight terms are dropped.
inline std::vector<KrausOperator> kraus_operators(const ChannelHandle& h) {
    const int n = h.N();
    const Mat u1 = h.U1.dense();
    const Mat u2 = h.U2.dense();
    std::vector<KrausOperator> out;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            const double w = std::sqrt(h.bath_A(a, a).real() * h.bath_B(b, b).real());
            if (w == 0.0) continue;
            for (int ao = 0; ao < 2; ++ao)
                for (int bo = 0; bo < 2; ++bo) {
                    Mat r;
                    if (h.target == Target::CB) {
                        // <ao|_A U2 |b>_B <bo|_B U1 |a>_A
                        const int d = 1 << (n - 1);
                        const int dh = d / 2;
                        Mat left = u2(Eigen::seqN(ao * d, d), Eigen::seqN(b, dh * 2, 2));
                        Mat right = u1(Eigen::seqN(bo, dh * 2, 2), Eigen::seqN(a * d, d));
                        r = w * left * right;
                    } else if (h.target == Target::AC) {
                        // <bo|_B U1 |a>_A <ao|_A U2 |b>_B
                        const int d = 1 << (n - 1);
                        const int dh = d / 2;
                        Mat left = u1(Eigen::seqN(bo, d, 2), Eigen::seqN(a * dh * 2, dh * 2));
                        Mat right = u2(Eigen::seqN(ao * d, d), Eigen::seqN(b, d, 2));
                        r = w * left * right;
                    } else {
                        // <ao, bo|_AB U |a, b>_AB
                        const int dc = 1 << (n - 2);
                        const int half = 1 << (n - 1);
                        r = w * u1(Eigen::seqN(ao * half + bo, dc, 2), Eigen::seqN(a * half + b, dc, 2));
                    }
                    out.push_back({r, a, b, ao, bo});
                }
        }
    return out;
}

inline std::vector<KrausOperator> kraus_set(const ChannelHandle& h) {
    if (!std::isfinite(h.config.beta1) || !std::isfinite(h.config.beta2))
        throw DomainError("kraus_set: infinite beta, use the zero-temperature decomposition instead");
    return kraus_operators(h);
}

inline Mat apply_kraus(const std::vector<KrausOperator>& ks, const Mat& rho) {
    Mat out = Mat::Zero(ks.front().R.rows(), ks.front().R.rows());
    for (const auto& k : ks) out += k.R * rho * k.R.adjoint();
    return out;
}

// ---- superoperators on operator subspaces ----

using UnitPair = std::pair<int, int>;

// Matrix units |i><j| of an m-site subsystem whose excitation counts differ by delta.
inline std::vector<UnitPair> unit_pairs(int m, int delta) {
    const auto label = excitation_labels(m);
    std::vector<UnitPair> out;
    const int d = 1 << m;
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i)
            if (label[i] - label[j] == delta) out.emplace_back(i, j);
    return out;
}

inline std::vector<UnitPair> all_pairs(int d) {
    std::vector<UnitPair> out;
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i) out.emplace_back(i, j);
    return out;
}

inline constexpr std::size_t kMaxSuperopPairs = 6000;

// Restriction of the channel to the span of the given matrix units, assumed invariant.
inline Mat restricted_superoperator(const std::vector<KrausOperator>& ks, const std::vector<UnitPair>& pairs) {
    if (pairs.size() > kMaxSuperopPairs)
        throw SizeError("superoperator block of size " + std::to_string(pairs.size()) + " exceeds cap");
    const Eigen::Index p = static_cast<Eigen::Index>(pairs.size());
    Mat m = Mat::Zero(p, p);
    for (const auto& k : ks) {
        const Mat rc = k.R.conjugate();
        for (Eigen::Index c = 0; c < p; ++c) {
            const auto [i, j] = pairs[c];
            for (Eigen::Index r = 0; r < p; ++r) m(r, c) += k.R(pairs[r].first, i) * rc(pairs[r].second, j);
        }
    }
    return m;
}

inline constexpr int kMaxFullSuperopDim = 64;

// Column-stacking convention: vec(rho)[i + j*d] = rho(i, j).
inline Mat superoperator_matrix(const ChannelHandle& h) {
    const int d = h.dim();
    if (d > kMaxFullSuperopDim) throw SizeError("superoperator_matrix: subsystem too large");
    Mat m(d * d, d * d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i) {
            Mat unit = Mat::Zero(d, d);
            unit(i, j) = 1.0;
            Mat out = apply_channel_matrix(h, unit);
            m.col(i + j * d) = Eigen::Map<const Vec>(out.data(), d * d);
        }
    return m;
}

inline bool uses_sectors(const ChannelHandle& h) { return h.fluid->H.conserves_magnetization; }

inline std::vector<UnitPair> fixed_point_pairs(const ChannelHandle& h) {
    return uses_sectors(h) ? unit_pairs(h.subsystem_sites(), 0) : all_pairs(h.dim());
}

inline Mat pairs_to_matrix(const Vec& x, const std::vector<UnitPair>& pairs, int d) {
    Mat rho = Mat::Zero(d, d);
    for (std::size_t k = 0; k < pairs.size(); ++k) rho(pairs[k].first, pairs[k].second) = x(k);
    return rho;
}

// ---- fixed points ----

enum class FixedPointMethod { Direct, Power, Eigen };

inline const char* to_string(FixedPointMethod m) {
    switch (m) {
        case FixedPointMethod::Direct: return "direct";
        case FixedPointMethod::Power: return "power";
        default: return "eigen";
    }
}

struct FixedPointResult {
    DensityMatrix rho;
    int iterations = 0;
    double residual = 0.0;
    FixedPointMethod method = FixedPointMethod::Direct;
};

inline Mat hermitize(const Mat& m) { return 0.5 * (m + m.adjoint()); }

inline Mat clamp_psd(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(hermitize(m));
    RVec l = es.eigenvalues().cwiseMax(0.0);
    Mat out = es.eigenvectors() * l.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
    return out / out.trace().real();
}

inline double channel_residual(const ChannelHandle& h, const Mat& rho) {
    return trace_norm(apply_channel_matrix(h, rho) - rho);
}

inline FixedPointResult fixed_point(const ChannelHandle& h, FixedPointMethod method = FixedPointMethod::Direct,
                                    double tol = 1e-12, int max_iter = 1000000) {
    const int d = h.dim();
    FixedPointResult res;
    res.method = method;
    if (method == FixedPointMethod::Power) {
        Mat rho = Mat::Identity(d, d) / static_cast<double>(d);
        double prev = -1.0;
        for (int it = 1; it <= max_iter; ++it) {
            Mat next = apply_channel_matrix(h, rho);
            const double delta = trace_norm(next - rho);
            rho = hermitize(next);
            res.iterations = it;
            if (delta < tol) break;
            if (prev > 0.0 && it > 50) {
                const double ratio = delta / prev;
                if (ratio >= 1.0 - 1e-15 || (ratio > 0.0 && std::log(tol / delta) / std::log(ratio) > max_iter - it))
                    throw ConvergenceError("fixed_point: power iteration will not reach tolerance", delta,
                                           1.0 - ratio);
            }
            prev = delta;
            if (it == max_iter)
                throw ConvergenceError("fixed_point: max_iter reached", delta, 0.0);
        }
        res.rho = {rho / rho.trace().real(), h.sites()};
        res.residual = channel_residual(h, res.rho.matrix);
        return res;
    }
    const auto pairs = fixed_point_pairs(h);
    const Mat m = restricted_superoperator(kraus_operators(h), pairs);
    const Eigen::Index p = m.rows();
    Vec x;
    if (method == FixedPointMethod::Direct) {
        Mat a = m - Mat::Identity(p, p);
        Eigen::Index trace_row = -1;
        for (Eigen::Index k = 0; k < p; ++k)
            if (pairs[k].first == pairs[k].second) {
                if (trace_row < 0) trace_row = k;
            }
        for (Eigen::Index k = 0; k < p; ++k)
            a(trace_row, k) = pairs[k].first == pairs[k].second ? cplx(1.0) : cplx(0.0);
        Vec rhs = Vec::Zero(p);
        rhs(trace_row) = 1.0;
        Eigen::PartialPivLU<Mat> lu(a);
        x = lu.solve(rhs);
        if (!x.allFinite()) throw ConvergenceError("fixed_point: singular linear system", 0.0, 0.0);
    } else {
        Eigen::ComplexEigenSolver<Mat> es(m);
        const Vec& ev = es.eigenvalues();
        Eigen::Index best = 0;
        for (Eigen::Index k = 1; k < ev.size(); ++k)
            if (std::abs(ev(k) - 1.0) < std::abs(ev(best) - 1.0)) best = k;
        for (Eigen::Index k = 0; k < ev.size(); ++k)
            if (k != best && std::abs(ev(k) - 1.0) < 1e-8)
                throw ConvergenceError("fixed_point: degenerate eigenvalue 1, fixed point not unique", 0.0, 0.0);
        x = es.eigenvectors().col(best);
    }
    Mat rho = pairs_to_matrix(x, pairs, d);
    rho /= rho.trace();
    rho = hermitize(rho);
    if (method == FixedPointMethod::Eigen) rho = clamp_psd(rho);
    res.rho = {rho, h.sites()};
    res.residual = channel_residual(h, rho);
    if (!(res.residual < std::max(tol, 1e-10)))
        throw ConvergenceError("fixed_point: residual above tolerance", res.residual, 0.0);
    return res;
}

// 1 - |lambda_2| from a list of eigenvalues containing the eigenvalue 1.
inline double gap_from_eigenvalues(std::vector<cplx> ev) {
    if (ev.size() < 2) return 1.0;
    auto one = std::min_element(ev.begin(), ev.end(),
                                [](cplx a, cplx b) { return std::abs(a - 1.0) < std::abs(b - 1.0); });
    ev.erase(one);
    double second = 0.0;
    for (cplx l : ev) second = std::max(second, std::abs(l));
    return 1.0 - second;
}

inline double spectral_gap_of(const Mat& superop) {
    Eigen::ComplexEigenSolver<Mat> es(superop, false);
    std::vector<cplx> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    return gap_from_eigenvalues(ev);
}

inline double spectral_gap(const ChannelHandle& h) {
    const auto ks = kraus_operators(h);
    std::vector<cplx> ev;
    auto collect = [&](const std::vector<UnitPair>& pairs) {
        if (pairs.empty()) return;
        Eigen::ComplexEigenSolver<Mat> es(restricted_superoperator(ks, pairs), false);
        for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) ev.push_back(es.eigenvalues()(k));
    };
    if (uses_sectors(h)) {
        const int m = h.subsystem_sites();
        for (int delta = -m; delta <= m; ++delta) collect(unit_pairs(m, delta));
    } else {
        collect(all_pairs(h.dim()));
    }
    return gap_from_eigenvalues(ev);
}

// ---- transient and limit cycle ----

struct CycleRecord {
    int cycle = 0;
    double Q_H = 0.0;
    double Q_C = 0.0;
    double W1 = 0.0;
    double W2 = 0.0;
    double W3 = 0.0;
    double W4 = 0.0;
    double W = 0.0;
    double dS_T1 = 0.0;
    double dS_T2 = 0.0;
    double energy_start = 0.0;
    double energy_end = 0.0;
    double mean_Q_H = 0.0;
    double mean_Q_C = 0.0;
    double mean_W = 0.0;
    double mean_clausius = 0.0;
};

inline double full_entropy(const Mat& rho) { return von_neumann_entropy({rho, site_range(1, 0)}); }

inline double energy(const WorkingFluid& f, const Mat& rho) { return (f.H.matrix * rho).trace().real(); }

// Runs m cycles from rho0, the full-chain state at the start of stroke 1.
inline std::vector<CycleRecord> iterate_transient(FluidPtr fluid, const CycleConfig& config,
                                                  const DensityMatrix& rho0, int m, bool entropies = true) {
    config.validate();
    const WorkingFluid& f = *fluid;
    if (rho0.dim() != f.dim()) throw DomainError("iterate_transient: rho0 must live on the full chain");
    const Mat ga = local_gibbs(f.E1, config.beta1).matrix;
    const Mat gb = local_gibbs(f.EN, config.beta2).matrix;
    const SectorUnitary u1 = f.unitary(config.tau1);
    const SectorUnitary u2 = f.unitary(config.second_evolution());
    std::vector<CycleRecord> out;
    Mat rho = rho0.matrix;
    double sum_qh = 0.0, sum_qc = 0.0, sum_w = 0.0, sum_c = 0.0;
    for (int c = 1; c <= m; ++c) {
        CycleRecord r;
        r.cycle = c;
        r.energy_start = energy(f, rho);
        r.W1 = sparse_expectation(f.H_AC, rho);
        const Mat rho_a = reduce_to_front_site(rho);
        r.Q_H = f.E1 * (sz_expectation(rho_a) - sz_expectation(ga));
        Mat x = kron_front(ga, trace_front(rho));
        if (entropies) r.dS_T1 = full_entropy(x) - full_entropy(rho);
        r.W2 = -sparse_expectation(f.H_AC, x);
        x = u1.apply(x);
        r.W3 = sparse_expectation(f.H_CB, x);
        const Mat rho_b = reduce_to_back_site(x);
        r.Q_C = f.EN * (sz_expectation(rho_b) - sz_expectation(gb));
        Mat y = kron_back(trace_back(x), gb);
        if (entropies) r.dS_T2 = full_entropy(y) - full_entropy(x);
        r.W4 = -sparse_expectation(f.H_CB, y);
        rho = u2.apply(y);
        r.energy_end = energy(f, rho);
        r.W = r.W1 + r.W2 + r.W3 + r.W4;
        sum_qh += r.Q_H;
        sum_qc += r.Q_C;
        sum_w += r.W;
        sum_c += config.beta1 * r.Q_H + config.beta2 * r.Q_C;
        r.mean_Q_H = sum_qh / c;
        r.mean_Q_C = sum_qc / c;
        r.mean_W = sum_w / c;
        r.mean_clausius = sum_c / c;
        out.push_back(r);
    }
    return out;
}

struct LimitCycle {
    CycleConfig config;
    DensityMatrix rho_CB_star;
    DensityMatrix rho_AC_star;
    DensityMatrix rho_ACB_star;
    DensityMatrix rho_ACB_tilde_star;
    DensityMatrix rho_C_star;       // two-stroke mode only
    Mat bath_A;
    Mat bath_B;
    int iterations = 0;
    double residual = 0.0;          // channel residual of the fixed point
    double loop_residual = 0.0;     // one more full loop from rho_ACB_star
    double relation_residual = 0.0; // independent AC fixed point vs loop-derived one
    FixedPointMethod method = FixedPointMethod::Direct;
};

struct LimitCycleOptions {
    FixedPointMethod method = FixedPointMethod::Direct;
    double tol = 1e-12;
    int max_iter = 1000000;
    bool verify_dual = true;
};

inline LimitCycle assemble_limit_cycle(FluidPtr fluid, const CycleConfig& config,
                                       const LimitCycleOptions& opt = {}) {
    config.validate();
    const WorkingFluid& f = *fluid;
    const int n = f.N();
    LimitCycle lc;
    lc.config = config;
    lc.method = opt.method;
    lc.bath_A = local_gibbs(f.E1, config.beta1).matrix;
    lc.bath_B = local_gibbs(f.EN, config.beta2).matrix;
    const SectorUnitary u1 = f.unitary(config.tau1);
    const SectorUnitary u2 = f.unitary(config.second_evolution());
    Mat start;  // state entering stroke 2
    if (config.mode == StrokeMode::TwoStroke) {
        const ChannelHandle hc = make_channel(fluid, config, Target::C);
        const FixedPointResult fp = fixed_point(hc, opt.method, opt.tol, opt.max_iter);
        lc.rho_C_star = fp.rho;
        lc.iterations = fp.iterations;
        lc.residual = fp.residual;
        start = kron_back(kron_front(lc.bath_A, fp.rho.matrix), lc.bath_B);
        lc.rho_CB_star = {trace_front(start), site_range(2, n)};
    } else {
        const ChannelHandle hcb = make_channel(fluid, config, Target::CB);
        const FixedPointResult fp = fixed_point(hcb, opt.method, opt.tol, opt.max_iter);
        lc.rho_CB_star = fp.rho;
        lc.iterations = fp.iterations;
        lc.residual = fp.residual;
        start = kron_front(lc.bath_A, fp.rho.matrix);
    }
    const Mat tilde = u1.apply(start);
    lc.rho_ACB_tilde_star = {tilde, site_range(1, n)};
    lc.rho_AC_star = {trace_back(tilde), site_range(1, n - 1)};
    const Mat corner = u2.apply(kron_back(lc.rho_AC_star.matrix, lc.bath_B));
    lc.rho_ACB_star = {corner, site_range(1, n)};

    const Mat again = u2.apply(kron_back(trace_back(u1.apply(kron_front(lc.bath_A, trace_front(corner)))), lc.bath_B));
    lc.loop_residual = trace_norm(again - corner);
    if (opt.verify_dual && config.mode == StrokeMode::FourStroke) {
        const ChannelHandle hac = make_channel(fluid, config, Target::AC);
        const FixedPointResult dual = fixed_point(hac, opt.method, opt.tol, opt.max_iter);
        const double r1 = trace_norm(dual.rho.matrix - lc.rho_AC_star.matrix);
        const Mat cb_from_dual = trace_front(u2.apply(kron_back(dual.rho.matrix, lc.bath_B)));
        const double r2 = trace_norm(cb_from_dual - lc.rho_CB_star.matrix);
        lc.relation_residual = std::max(r1, r2);
    }
    return lc;
}

}  // namespace spinmachine
