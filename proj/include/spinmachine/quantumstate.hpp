#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unsupported/Eigen/KroneckerProduct>

#include "spinmachine/spinchain.hpp"
#include "spinmachine/types.hpp"

namespace spinmachine {

// Density matrix on an ordered list of site labels; the first label is the most
// significant bit of the matrix index.
struct DensityMatrix {
    Mat matrix;
    IndexList sites;

    int dim() const { return static_cast<int>(matrix.rows()); }

    void validate(double herm_tol = 1e-12, double psd_tol = 1e-10, double trace_tol = 1e-12) const {
        if (matrix.rows() != (1 << sites.size()) || matrix.cols() != matrix.rows())
            throw DomainError("DensityMatrix: dimension does not match site count");
        if (max_abs(matrix - matrix.adjoint()) > herm_tol)
            throw DomainError("DensityMatrix: not Hermitian");
        if (std::abs(matrix.trace() - cplx(1.0)) > trace_tol)
            throw DomainError("DensityMatrix: trace differs from 1");
        Eigen::SelfAdjointEigenSolver<Mat> es(matrix, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -psd_tol)
            throw DomainError("DensityMatrix: negative eigenvalue");
    }
};

inline IndexList site_range(int first, int last) {
    IndexList s;
    for (int i = first; i <= last; ++i) s.push_back(i);
    return s;
}

inline DensityMatrix maximally_mixed(const IndexList& sites) {
    const int d = 1 << sites.size();
    return {Mat::Identity(d, d) / static_cast<double>(d), sites};
}

inline DensityMatrix pure_state(const Vec& psi, const IndexList& sites) {
    return {psi * psi.adjoint() / psi.squaredNorm(), sites};
}

// Diagonal 2x2 state, index 0 = down, index 1 = up.
inline DensityMatrix local_gibbs(double E, double beta, int site = 1) {
    if (beta < 0.0 || std::isnan(beta)) throw DomainError("local_gibbs: beta must be >= 0");
    const double p = up_probability(E, beta);
    Mat m = Mat::Zero(2, 2);
    m(0, 0) = 1.0 - p;
    m(1, 1) = p;
    return {m, {site}};
}

inline DensityMatrix local_pure(int up, int site = 1) {
    Mat m = Mat::Zero(2, 2);
    m(up ? 1 : 0, up ? 1 : 0) = 1.0;
    return {m, {site}};
}

namespace detail {

inline int position_of(const IndexList& sites, int label) {
    auto it = std::find(sites.begin(), sites.end(), label);
    if (it == sites.end()) throw DomainError("site " + std::to_string(label) + " not present");
    return static_cast<int>(it - sites.begin());
}

// Maps a sub-index over `positions` (most significant first) into the bits of a
// full index over `n` positions.
inline unsigned scatter_bits(unsigned sub, const IndexList& positions, int n) {
    unsigned full = 0;
    const int m = static_cast<int>(positions.size());
    for (int k = 0; k < m; ++k)
        if ((sub >> (m - 1 - k)) & 1u) full |= 1u << (n - 1 - positions[k]);
    return full;
}

}  // namespace detail

// Reorders the tensor factors so that the result lists sites in `order`.
inline DensityMatrix permute_sites(const DensityMatrix& rho, const IndexList& order) {
    const int n = static_cast<int>(rho.sites.size());
    if (static_cast<int>(order.size()) != n) throw DomainError("permute_sites: size mismatch");
    IndexList pos(n);
    for (int k = 0; k < n; ++k) pos[k] = detail::position_of(rho.sites, order[k]);
    const int d = rho.dim();
    std::vector<int> map(d);
    for (int s = 0; s < d; ++s) map[s] = static_cast<int>(detail::scatter_bits(s, pos, n));
    Mat out(d, d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i) out(i, j) = rho.matrix(map[i], map[j]);
    return {out, order};
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, const IndexList& keep) {
    const int n = static_cast<int>(rho.sites.size());
    IndexList kp, tp;
    for (int label : keep) kp.push_back(detail::position_of(rho.sites, label));
    for (int k = 0; k < n; ++k)
        if (std::find(kp.begin(), kp.end(), k) == kp.end()) tp.push_back(k);
    if (kp.size() + tp.size() != static_cast<std::size_t>(n))
        throw DomainError("partial_trace: duplicate keep labels");
    const int dk = 1 << kp.size();
    const int dt = 1 << tp.size();
    std::vector<unsigned> kbits(dk), tbits(dt);
    for (int a = 0; a < dk; ++a) kbits[a] = detail::scatter_bits(a, kp, n);
    for (int t = 0; t < dt; ++t) tbits[t] = detail::scatter_bits(t, tp, n);
    Mat out = Mat::Zero(dk, dk);
    for (int b = 0; b < dk; ++b)
        for (int a = 0; a < dk; ++a) {
            cplx s = 0.0;
            for (int t = 0; t < dt; ++t) s += rho.matrix(kbits[a] | tbits[t], kbits[b] | tbits[t]);
            out(a, b) = s;
        }
    return {out, keep};
}

inline DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
    for (int x : a.sites)
        if (std::find(b.sites.begin(), b.sites.end(), x) != b.sites.end())
            throw DomainError("tensor: overlapping site labels");
    IndexList joined = a.sites;
    joined.insert(joined.end(), b.sites.begin(), b.sites.end());
    DensityMatrix raw{Eigen::kroneckerProduct(a.matrix, b.matrix).eval(), joined};
    IndexList sorted = joined;
    std::sort(sorted.begin(), sorted.end());
    if (sorted == joined) return raw;
    return permute_sites(raw, sorted);
}

inline double von_neumann_entropy(const DensityMatrix& rho) {
    Mat h = 0.5 * (rho.matrix + rho.matrix.adjoint());
    Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
    double s = 0.0;
    for (int k = 0; k < es.eigenvalues().size(); ++k) {
        const double l = es.eigenvalues()(k);
        if (l < -1e-10) throw DomainError("von_neumann_entropy: eigenvalue below clamp window");
        if (l > 0.0) s -= l * std::log(l);
    }
    return s;
}

inline double expectation(const DensityMatrix& rho, const Mat& obs) {
    if (obs.rows() != rho.matrix.rows() || obs.cols() != rho.matrix.cols())
        throw DomainError("expectation: dimension mismatch");
    const cplx v = (obs * rho.matrix).trace();
    const double scale = std::max(1.0, max_abs(obs));
    if (std::abs(v.imag()) > 1e-10 * scale)
        throw InconsistencyError("expectation: imaginary part " + std::to_string(v.imag()));
    return v.real();
}

// Spin-z expectation of a single-site state.
inline double sz_expectation(const Mat& rho2) { return 0.5 * (rho2(1, 1) - rho2(0, 0)).real(); }

struct EntropyJump {
    double deltaS_T = 0.0;
    double subadditivity_bound = 0.0;
    double heat_bound = 0.0;
    double heat = 0.0;
    bool ok = false;
};

// Entropy change when `site` is replaced by its Gibbs state, with the chain of
// lower bounds S(gibbs) - S(rho_site) >= -beta * Q.
inline EntropyJump entropy_jump_bounds(const DensityMatrix& rho_before, int site, double beta,
                                       double E) {
    const DensityMatrix g = local_gibbs(E, beta, site);
    IndexList rest;
    for (int s : rho_before.sites)
        if (s != site) rest.push_back(s);
    const DensityMatrix reduced_site = partial_trace(rho_before, {site});
    EntropyJump out;
    const double s_before = von_neumann_entropy(rho_before);
    double s_after = von_neumann_entropy(g);
    if (!rest.empty()) s_after += von_neumann_entropy(partial_trace(rho_before, rest));
    out.deltaS_T = s_after - s_before;
    out.subadditivity_bound = von_neumann_entropy(g) - von_neumann_entropy(reduced_site);
    out.heat = E * (sz_expectation(reduced_site.matrix) - sz_expectation(g.matrix));
    out.heat_bound = std::isinf(beta) ? -kInfiniteBeta : -beta * out.heat;
    out.ok = out.deltaS_T >= out.subadditivity_bound - 1e-10 &&
             out.subadditivity_bound >= out.heat_bound - 1e-10;
    return out;
}

struct BlockParts {
    Mat bd;
    Mat off;
};

inline BlockParts block_decompose(const Mat& rho, const MagnetizationBlocks& blocks) {
    const int d = static_cast<int>(rho.rows());
    if (d != (1 << blocks.sites.size())) throw DomainError("block_decompose: dimension mismatch");
    std::vector<int> label(d, -1);
    for (std::size_t n = 0; n < blocks.blocks.size(); ++n)
        for (int i : blocks.blocks[n]) label[i] = static_cast<int>(n);
    BlockParts out{Mat::Zero(d, d), rho};
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i)
            if (label[i] == label[j]) {
                out.bd(i, j) = rho(i, j);
                out.off(i, j) = 0.0;
            }
    return out;
}

inline BlockParts block_decompose(const DensityMatrix& rho, const MagnetizationBlocks& blocks) {
    return block_decompose(rho.matrix, blocks);
}

// Excitation count of every basis index of an m-site subsystem.
inline std::vector<int> excitation_labels(int m) {
    std::vector<int> label(1 << m);
    for (int s = 0; s < (1 << m); ++s) label[s] = popcount(static_cast<unsigned>(s));
    return label;
}

}  // namespace spinmachine
