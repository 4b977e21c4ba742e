#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "spinmachine/spinchain.hpp"
#include "spinmachine/thermo.hpp"
#include "spinmachine/types.hpp"

namespace spinmachine {

struct LowTempParams {
    double x1 = 0.0;
    double x2 = 0.0;

    void validate() const {
        for (double x : {x1, x2})
            if (!(x >= 0.0 && x < 1.0)) throw DomainError("LowTempParams: x must lie in [0, 1)");
    }

    static LowTempParams from_betas(double E1, double EN, double beta1, double beta2) {
        if (!(E1 > 0.0) || !(EN > 0.0)) throw DomainError("LowTempParams: need E1 > 0 and EN > 0");
        LowTempParams p{std::exp(-beta1 * E1), std::exp(-beta2 * EN)};
        p.validate();
        return p;
    }
};

// Eigendecomposition of the one-excitation block, shared by every tau.
struct OneExcitationSpectrum {
    RVec w;
    Mat Q;
    double vacuum = 0.0;

    int N() const { return static_cast<int>(w.size()); }

    Mat unitary(double tau) const {
        Vec ph(w.size());
        for (int k = 0; k < w.size(); ++k) ph(k) = std::exp(cplx(0.0, -w(k) * tau));
        return Q * ph.asDiagonal() * Q.adjoint();
    }

    cplx vacuum_phase(double tau) const { return std::exp(cplx(0.0, -vacuum * tau)); }
};

inline OneExcitationSpectrum one_excitation_spectrum(const ChainSpec& spec) {
    const Mat h = one_excitation_block(spec);
    if (h.imag().isZero(0.0)) {
        Eigen::SelfAdjointEigenSolver<RMat> es(h.real());
        if (es.info() != Eigen::Success)
            throw ConvergenceError("one_excitation_spectrum: eigensolver failed", 0.0, 0.0);
        return {es.eigenvalues(), es.eigenvectors().cast<cplx>(), vacuum_energy(spec)};
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(h);
    if (es.info() != Eigen::Success) throw ConvergenceError("one_excitation_spectrum: eigensolver failed", 0.0, 0.0);
    return {es.eigenvalues(), es.eigenvectors(), vacuum_energy(spec)};
}

// Site k of the chain (1-based) is basis vector k-1; A is index 0, B is index N-1.
struct OneExcitationSector {
    Mat U1;
    cplx vacuum_phase{1.0, 0.0};

    int N() const { return static_cast<int>(U1.rows()); }
    int a() const { return 0; }
    int b() const { return N() - 1; }
    int c_size() const { return N() - 2; }

    // Restriction of U1 to the interior sites.
    Mat V() const { return U1.block(1, 1, c_size(), c_size()); }
    // Interior amplitudes after one evolution starting from A (j = 1) or B (j = 2).
    Vec injected(int j) const { return U1.col(j == 1 ? a() : b()).segment(1, c_size()); }
    // Amplitudes <site|U|interior> for site A or B.
    Vec row_on_c(int site) const { return U1.row(site).segment(1, c_size()).transpose(); }

    double unitarity_residual() const {
        return max_abs(U1.adjoint() * U1 - Mat::Identity(N(), N()));
    }

    // |U_AA|^2 + |U_AB|^2 + sum_l |U_Al|^2 - 1.
    double conservation_residual() const { return std::abs(U1.row(a()).squaredNorm() - 1.0); }
};

inline OneExcitationSector one_excitation_unitary(const OneExcitationSpectrum& s, double tau) {
    return {s.unitary(tau), s.vacuum_phase(tau)};
}

inline OneExcitationSector one_excitation_unitary(const ChainSpec& spec, double tau) {
    return one_excitation_unitary(one_excitation_spectrum(spec), tau);
}

// Zero-temperature two-stroke channel on span{vacuum, one excitation in C}.
// Matrices are indexed with 0 = vacuum and k = 1..N-2 = excitation on site k+1.
struct SectorChannel {
    Mat V;
    cplx vacuum_phase{1.0, 0.0};

    int dim() const { return static_cast<int>(V.rows()) + 1; }

    Mat apply(const Mat& rho) const {
        const int n = static_cast<int>(V.rows());
        if (rho.rows() != n + 1 || rho.cols() != n + 1) throw DomainError("SectorChannel: dimension mismatch");
        Mat out(n + 1, n + 1);
        const Mat cc = rho.block(1, 1, n, n);
        const Mat vcc = V * cc * V.adjoint();
        out.block(1, 1, n, n) = vcc;
        out(0, 0) = rho(0, 0) + cc.trace() - vcc.trace();
        out.block(0, 1, 1, n) = vacuum_phase * rho.block(0, 1, 1, n) * V.adjoint();
        out.block(1, 0, n, 1) = out.block(0, 1, 1, n).adjoint();
        return out;
    }
};

inline SectorChannel zero_temp_channel_1ex(const OneExcitationSector& s) {
    return {s.V(), s.vacuum_phase};
}

inline SectorChannel zero_temp_channel_1ex(const ChainSpec& spec, double tau) {
    return zero_temp_channel_1ex(one_excitation_unitary(spec, tau));
}

enum class SectorMethod { Auto, Series, Linear };

// Largest interior size for which Auto picks the dense Schur solve.
inline constexpr int kLinearSectorCap = 200;

struct ExcitationCorrection {
    Mat delta_rho;   // vacuum + interior basis, see SectorChannel
    Mat D;           // interior block of delta_rho
    double gamma = 0.0;
    Mat varrho;
    RVec p;
    Mat phi;
    SectorMethod method = SectorMethod::Linear;
    long terms = 0;
    double tail = 0.0;
};

// Solves D - V D V^dagger = c c^dagger by a complex Schur factorization of V.
inline Mat stein_solve(const Mat& V, const Vec& c) {
    const int n = static_cast<int>(V.rows());
    if (n == 0) return Mat(0, 0);
    Eigen::ComplexSchur<Mat> cs(V);
    if (cs.info() != Eigen::Success) throw ConvergenceError("stein_solve: Schur factorization failed", 0.0, 0.0);
    const Mat& T = cs.matrixT();
    const Mat& Z = cs.matrixU();
    const Vec zc = Z.adjoint() * c;
    const Mat G = zc * zc.adjoint();
    Mat Y = Mat::Zero(n, n);
    Vec acc(n);
    for (int j = n - 1; j >= 0; --j) {
        acc.setZero();
        for (int k = j + 1; k < n; ++k) acc += std::conj(T(j, k)) * Y.col(k);
        Vec rhs = G.col(j) + T * acc;
        Mat lhs = -std::conj(T(j, j)) * T;
        lhs.diagonal().array() += 1.0;
        Y.col(j) = lhs.triangularView<Eigen::Upper>().solve(rhs);
    }
    Mat D = Z * Y * Z.adjoint();
    return 0.5 * (D + D.adjoint());
}

inline Mat stein_series(const Mat& V, const Vec& c, long& terms, double& tail, double tol = 1e-14,
                        long max_terms = 10000000) {
    const int n = static_cast<int>(V.rows());
    Mat D = Mat::Zero(n, n);
    Vec v = c;
    terms = 0;
    tail = v.squaredNorm();
    while (tail >= tol) {
        if (terms >= max_terms)
            throw ConvergenceError("stein_series: tail " + std::to_string(tail) + " after " + std::to_string(terms) +
                                       " terms",
                                   tail, 0.0);
        D.noalias() += v * v.adjoint();
        v = V * v;
        tail = v.squaredNorm();
        ++terms;
    }
    return D;
}

inline SectorMethod resolve_method(SectorMethod m, int interior) {
    if (m != SectorMethod::Auto) return m;
    return interior <= kLinearSectorCap ? SectorMethod::Linear : SectorMethod::Series;
}

inline ExcitationCorrection delta_rho_star(const OneExcitationSector& s, int j, SectorMethod method = SectorMethod::Auto) {
    if (j != 1 && j != 2) throw DomainError("delta_rho_star: j must be 1 or 2");
    const int n = s.c_size();
    ExcitationCorrection out;
    out.method = resolve_method(method, n);
    if (n > 0) {
        const Mat V = s.V();
        const Vec c = s.injected(j);
        if (out.method == SectorMethod::Linear) {
            out.D = stein_solve(V, c);
        } else {
            out.D = stein_series(V, c, out.terms, out.tail);
        }
    } else {
        out.D = Mat(0, 0);
    }
    out.gamma = out.D.trace().real();
    out.delta_rho = Mat::Zero(n + 1, n + 1);
    out.delta_rho(0, 0) = -out.gamma;
    out.delta_rho.block(1, 1, n, n) = out.D;
    if (n > 0 && out.gamma > 0.0) {
        out.varrho = out.D / out.gamma;
        Eigen::SelfAdjointEigenSolver<Mat> es(out.varrho);
        out.p = es.eigenvalues();
        out.phi = es.eigenvectors();
    } else {
        out.varrho = Mat::Zero(n, n);
        out.p = RVec::Zero(n);
        out.phi = Mat::Identity(n, n);
    }
    return out;
}

inline ExcitationCorrection delta_rho_star(const ChainSpec& spec, double tau, int j,
                                           SectorMethod method = SectorMethod::Auto) {
    return delta_rho_star(one_excitation_unitary(spec, tau), j, method);
}

struct F2Result {
    double f2 = 0.0;
    double f2_lower = 0.0;
    double f2_upper = 0.0;
    // Upper bound on the probability not yet resolved by a truncated series.
    double tail_bound = 0.0;
    double gamma = std::numeric_limits<double>::quiet_NaN();
    double transfer = 0.0;       // |<A|U|B>|^2
    double interior = 0.0;       // sum_l |<A|U|l>|^2
    double conservation_residual = 0.0;
    long cycles = 0;
    bool converged = true;
};

// f2 = |U_AB|^2 + sum_l (1 - gamma p_l) |<A|U|phi_l>|^2 from the correction D.
inline F2Result f2_from_correction(const OneExcitationSector& s, const ExcitationCorrection& corr) {
    F2Result r;
    r.transfer = std::norm(s.U1(s.a(), s.b()));
    r.gamma = corr.gamma;
    r.conservation_residual = s.conservation_residual();
    double sum = r.transfer;
    if (s.c_size() > 0) {
        const Vec row = s.row_on_c(s.a());
        r.interior = row.squaredNorm();
        for (int l = 0; l < corr.p.size(); ++l) {
            const double overlap = std::norm(row.cwiseProduct(corr.phi.col(l)).sum());
            sum += (1.0 - corr.gamma * corr.p(l)) * overlap;
        }
    }
    r.f2 = r.f2_lower = r.f2_upper = sum;
    r.cycles = corr.terms;
    r.tail_bound = corr.tail;
    return r;
}

// Tracks the excitation injected at A cycle by cycle in the eigenbasis of the
// one-excitation block. After each evolution the amplitude on A and B is
// removed; the accumulated weight absorbed at A gives 1 - f2.
inline F2Result finish_series(F2Result r, double pa, double rem, long cycles, double tol) {
    r.cycles = cycles;
    r.tail_bound = rem;
    r.f2_upper = std::min(1.0, std::max(0.0, 1.0 - pa));
    r.f2_lower = std::min(1.0, std::max(0.0, 1.0 - pa - rem));
    r.f2 = 0.5 * (r.f2_lower + r.f2_upper);
    r.converged = rem < tol;
    return r;
}

// Same recursion with real eigenvectors, split into real and imaginary parts.
inline F2Result f2_series_real(const OneExcitationSpectrum& sp, double tau, long max_cycles, double tol) {
    using Arr = Eigen::ArrayXd;
    const int n = sp.N();
    const Arr qa = sp.Q.row(0).real().transpose().array();
    const Arr qb = sp.Q.row(n - 1).real().transpose().array();
    const Arr lr = (-sp.w.array() * tau).cos();
    const Arr li = (-sp.w.array() * tau).sin();
    Arr pr = qa, pi = Arr::Zero(n), tmp(n);
    F2Result r;
    double pa = 0.0, rem = 1.0;
    long k = 0;
    for (; k < max_cycles; ++k) {
        tmp = pr * lr - pi * li;
        pi = pr * li + pi * lr;
        pr.swap(tmp);
        const double ar = (qa * pr).sum(), ai = (qa * pi).sum();
        const double br = (qb * pr).sum(), bi = (qb * pi).sum();
        if (k == 0) {
            r.transfer = br * br + bi * bi;
            r.interior = std::max(0.0, 1.0 - ar * ar - ai * ai - r.transfer);
        }
        pa += ar * ar + ai * ai;
        pr -= qa * ar + qb * br;
        pi -= qa * ai + qb * bi;
        if ((k & 31) == 31 || k == 0) {
            rem = pr.square().sum() + pi.square().sum();
            if (rem < tol) {
                ++k;
                break;
            }
        }
    }
    rem = pr.square().sum() + pi.square().sum();
    return finish_series(r, pa, rem, k, tol);
}

inline F2Result f2_series(const OneExcitationSpectrum& sp, double tau, long max_cycles, double tol = 1e-14) {
    if (sp.Q.imag().isZero(0.0)) return f2_series_real(sp, tau, max_cycles, tol);
    const int n = sp.N();
    const int ia = 0, ib = n - 1;
    Vec qa = sp.Q.row(ia).transpose();
    Vec qb = sp.Q.row(ib).transpose();
    Vec lambda(n);
    for (int k = 0; k < n; ++k) lambda(k) = std::exp(cplx(0.0, -sp.w(k) * tau));
    Vec phi = qa.conjugate();
    const Vec qa_c = qa.conjugate();
    const Vec qb_c = qb.conjugate();
    F2Result r;
    double pa = 0.0;
    double rem = 1.0;
    long k = 0;
    for (; k < max_cycles; ++k) {
        phi.array() *= lambda.array();
        const cplx amp_a = qa.cwiseProduct(phi).sum();
        const cplx amp_b = qb.cwiseProduct(phi).sum();
        if (k == 0) {
            r.transfer = std::norm(amp_b);
            r.interior = std::max(0.0, 1.0 - std::norm(amp_a) - std::norm(amp_b));
        }
        pa += std::norm(amp_a);
        phi -= qa_c * amp_a + qb_c * amp_b;
        if ((k & 31) == 31 || k == 0) {
            rem = phi.squaredNorm();
            if (rem < tol) {
                ++k;
                break;
            }
        }
    }
    return finish_series(r, pa, phi.squaredNorm(), k, tol);
}

inline F2Result f2_lowtemp(const ChainSpec& spec, double tau, SectorMethod method = SectorMethod::Auto,
                           long max_cycles = 10000000) {
    const OneExcitationSpectrum sp = one_excitation_spectrum(spec);
    const OneExcitationSector s = one_excitation_unitary(sp, tau);
    const SectorMethod m = resolve_method(method, s.c_size());
    if (m == SectorMethod::Linear) return f2_from_correction(s, delta_rho_star(s, 1, m));
    F2Result r = f2_series(sp, tau, max_cycles);
    r.conservation_residual = s.conservation_residual();
    if (!r.converged)
        throw ConvergenceError("f2_lowtemp: series tail " + std::to_string(r.tail_bound) + " after " +
                                   std::to_string(r.cycles) + " cycles",
                               r.tail_bound, 0.0);
    return r;
}

// Many tau values on one spectrum with a fixed cycle budget per point. Points
// whose series does not finish are returned with converged = false and
// rigorous bounds [f2_lower, f2_upper].
struct LowTempSweeper {
    OneExcitationSpectrum spectrum;

    explicit LowTempSweeper(const ChainSpec& spec) : spectrum(one_excitation_spectrum(spec)) {}

    double conservation_residual(double tau) const {
        const int n = spectrum.N();
        Vec ph(n);
        for (int k = 0; k < n; ++k) ph(k) = std::exp(cplx(0.0, -spectrum.w(k) * tau));
        const Vec row = (spectrum.Q.row(0).transpose().array() * ph.array()).matrix();
        const Vec ua = spectrum.Q.conjugate() * row;
        return std::abs(ua.squaredNorm() - 1.0);
    }

    F2Result evaluate(double tau, long budget) const {
        F2Result r = f2_series(spectrum, tau, budget);
        r.conservation_residual = conservation_residual(tau);
        return r;
    }
};

struct ChiCoefficients {
    double chi_A1 = 0.0;
    double chi_A2 = 0.0;
    double chi_B1 = 0.0;
    double chi_B2 = 0.0;

    double symmetry_residual() const {
        const double ref = chi_A1;
        return std::max({std::abs(chi_A2 + ref), std::abs(chi_B2 - ref), std::abs(chi_B1 + ref)});
    }
};

// First-order response of the populations of A and B to x1 and x2, obtained
// by evolving the perturbation (|j><j| - |vac><vac| + delta_rho[j]) once.
inline ChiCoefficients chi_coefficients(const OneExcitationSector& s, SectorMethod method = SectorMethod::Auto) {
    auto population = [&](int j, int site) {
        const int src = j == 1 ? s.a() : s.b();
        double p = std::norm(s.U1(site, src));
        if (s.c_size() > 0) {
            const ExcitationCorrection corr = delta_rho_star(s, j, method);
            const Vec row = s.row_on_c(site);
            p += (row.transpose() * corr.D * row.conjugate())(0).real();
        }
        return p;
    };
    ChiCoefficients c;
    c.chi_A1 = population(1, s.a()) - 1.0;
    c.chi_A2 = population(2, s.a());
    c.chi_B1 = population(1, s.b());
    c.chi_B2 = population(2, s.b()) - 1.0;
    return c;
}

// Heats to first order in x (energy delivered to each bath counted positive).
inline CycleThermo lowtemp_thermo(double f2, double E1, double EN, const LowTempParams& x, double beta1, double beta2) {
    x.validate();
    const double d = (x.x1 - x.x2) * f2;
    CycleThermo t;
    t.Q_C_star = d * EN;
    t.Q_H_star = -d * E1;
    t.W_star = d * (E1 - EN);
    t.W_quench = t.W_star;
    t.clausius_star = d * (beta2 * EN - beta1 * E1);
    fill_regime(t, beta1, beta2, default_zero_tol(E1, EN) * std::max(std::abs(d), 1e-300));
    return t;
}

inline CycleThermo lowtemp_thermo(const ChainSpec& spec, double tau, const LowTempParams& x, double beta1,
                                  double beta2) {
    const double f2 = f2_lowtemp(spec, tau).f2;
    return lowtemp_thermo(f2, spec.E.front(), spec.E.back(), x, beta1, beta2);
}

}  // namespace spinmachine
