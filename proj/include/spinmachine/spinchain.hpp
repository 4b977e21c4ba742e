#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "spinmachine/types.hpp"

namespace spinmachine {

// Open chain of N spin-1/2 sites with local fields E and nearest-neighbour
// couplings J (exchange), K (antisymmetric exchange) and F (Ising).
struct ChainSpec {
    std::vector<double> E;
    std::vector<double> J;
    std::vector<double> K;
    std::vector<double> F;

    int N() const { return static_cast<int>(E.size()); }

    void validate() const {
        if (E.size() < 2) throw DomainError("ChainSpec: need at least two sites");
        const auto bonds = E.size() - 1;
        if (J.size() != bonds || K.size() != bonds || F.size() != bonds)
            throw DomainError("ChainSpec: coupling vectors must have N-1 entries");
        auto finite = [](const std::vector<double>& v) {
            return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
        };
        if (!finite(E) || !finite(J) || !finite(K) || !finite(F))
            throw DomainError("ChainSpec: non-finite entry");
    }

    bool conserves_magnetization() const { return true; }

    static ChainSpec uniform(int n, double e, double j, double k = 0.0, double f = 0.0) {
        ChainSpec s;
        s.E.assign(n, e);
        s.J.assign(n - 1, j);
        s.K.assign(n - 1, k);
        s.F.assign(n - 1, f);
        return s;
    }
};

// Two-site model without magnetization symmetry.
struct NoSymPairSpec {
    double E1 = 0.0;
    double E2 = 0.0;
    double J_R = 0.0;
    double J_I = 0.0;
    double K_R = 0.0;
    double K_I = 0.0;
    double F = 0.0;

    void validate() const {
        for (double x : {E1, E2, J_R, J_I, K_R, K_I, F})
            if (!std::isfinite(x)) throw DomainError("NoSymPairSpec: non-finite entry");
    }
};

// Dense Hamiltonian in the computational basis: site 1 is the most significant
// bit of the basis index and bit value 1 means spin up.
struct Hamiltonian {
    Mat matrix;
    int site_count = 0;
    bool conserves_magnetization = true;

    int dim() const { return static_cast<int>(matrix.rows()); }
};

struct MagnetizationBlocks {
    IndexList sites;
    std::vector<IndexList> blocks;
};

inline int site_bit(int site, int n) { return n - site; }

inline bool is_up(unsigned index, int site, int n) { return (index >> site_bit(site, n)) & 1u; }

inline void check_dense_size(int n) {
    if (n > kDenseSiteCap)
        throw SizeError("dense Hilbert space limited to " + std::to_string(kDenseSiteCap) +
                        " sites, got " + std::to_string(n));
}

// Builds the selected terms of the chain Hamiltonian. site_mask[i] keeps the
// local field on site i+1, bond_mask[b] keeps every coupling on bond (b+1, b+2).
inline Mat build_hamiltonian_terms(const ChainSpec& spec, const std::vector<bool>& site_mask,
                                   const std::vector<bool>& bond_mask) {
    spec.validate();
    const int n = spec.N();
    check_dense_size(n);
    const int dim = 1 << n;
    Mat h = Mat::Zero(dim, dim);
    for (int s = 0; s < dim; ++s) {
        const unsigned u = static_cast<unsigned>(s);
        double diag = 0.0;
        for (int i = 1; i <= n; ++i)
            if (site_mask[i - 1]) diag += spec.E[i - 1] * (is_up(u, i, n) ? 0.5 : -0.5);
        for (int b = 1; b < n; ++b) {
            if (!bond_mask[b - 1]) continue;
            const bool ui = is_up(u, b, n);
            const bool uj = is_up(u, b + 1, n);
            diag += spec.F[b - 1] * (ui == uj ? 1.0 : -1.0);
            if (ui != uj) {
                // S+_b S-_{b+1} carries 2(J + iK); its adjoint carries 2(J - iK).
                const unsigned t = u ^ (1u << site_bit(b, n)) ^ (1u << site_bit(b + 1, n));
                const cplx amp(2.0 * spec.J[b - 1], 2.0 * spec.K[b - 1]);
                h(static_cast<int>(t), s) += ui ? std::conj(amp) : amp;
            }
        }
        h(s, s) += diag;
    }
    return h;
}

inline Hamiltonian build_hamiltonian(const ChainSpec& spec) {
    spec.validate();
    std::vector<bool> sites(spec.N(), true), bonds(spec.N() - 1, true);
    return {build_hamiltonian_terms(spec, sites, bonds), spec.N(), true};
}

inline Mat site_hamiltonian(const ChainSpec& spec, int site) {
    std::vector<bool> sites(spec.N(), false), bonds(spec.N() - 1, false);
    sites.at(site - 1) = true;
    return build_hamiltonian_terms(spec, sites, bonds);
}

inline Mat bond_hamiltonian(const ChainSpec& spec, int bond) {
    std::vector<bool> sites(spec.N(), false), bonds(spec.N() - 1, false);
    bonds.at(bond - 1) = true;
    return build_hamiltonian_terms(spec, sites, bonds);
}

// Index order |s1 s2> -> 2*s1 + s2 with s = 1 for spin up.
inline Hamiltonian build_nosym_hamiltonian(const NoSymPairSpec& p) {
    p.validate();
    Mat h = Mat::Zero(4, 4);
    for (int s = 0; s < 4; ++s) {
        const double z1 = (s & 2) ? 0.5 : -0.5;
        const double z2 = (s & 1) ? 0.5 : -0.5;
        h(s, s) = p.E1 * z1 + p.E2 * z2 + p.F * z1 * z2;
    }
    const cplx exch(2.0 * p.J_R, 2.0 * p.J_I);
    const cplx pair(2.0 * p.K_R, 2.0 * p.K_I);
    h(2, 1) = exch;
    h(1, 2) = std::conj(exch);
    h(3, 0) = pair;
    h(0, 3) = std::conj(pair);
    const bool conserves = p.K_R == 0.0 && p.K_I == 0.0;
    return {h, 2, conserves};
}

// Coupling part of the two-site model (everything except the local fields).
inline Mat nosym_coupling(const NoSymPairSpec& p) {
    NoSymPairSpec c = p;
    c.E1 = 0.0;
    c.E2 = 0.0;
    return build_nosym_hamiltonian(c).matrix;
}

inline ChainSpec nosym_as_chain(const NoSymPairSpec& p) {
    if (p.K_R != 0.0 || p.K_I != 0.0)
        throw DomainError("nosym_as_chain: pair terms break magnetization symmetry");
    ChainSpec s;
    s.E = {p.E1, p.E2};
    s.J = {p.J_R};
    s.K = {p.J_I};
    s.F = {p.F / 4.0};
    return s;
}

inline void check_sites(const IndexList& sites, int n) {
    for (std::size_t k = 0; k < sites.size(); ++k) {
        if (sites[k] < 1 || sites[k] > n)
            throw DomainError("site index " + std::to_string(sites[k]) + " out of range 1.." +
                              std::to_string(n));
        for (std::size_t l = 0; l < k; ++l)
            if (sites[l] == sites[k]) throw DomainError("duplicate site index");
    }
}

inline Hamiltonian magnetization_operator(const IndexList& sites, int n) {
    check_sites(sites, n);
    check_dense_size(n);
    const int dim = 1 << n;
    Mat m = Mat::Zero(dim, dim);
    for (int s = 0; s < dim; ++s) {
        double z = 0.0;
        for (int site : sites) z += is_up(static_cast<unsigned>(s), site, n) ? 0.5 : -0.5;
        m(s, s) = z;
    }
    return {m, n, true};
}

// Subsystem basis indices grouped by the number of up spins; the subsystem is
// the ordered site list, so indices run over 2^|sites| states.
inline MagnetizationBlocks excitation_blocks(const IndexList& sites, int n) {
    check_sites(sites, n);
    const int m = static_cast<int>(sites.size());
    MagnetizationBlocks out{sites, std::vector<IndexList>(m + 1)};
    for (int s = 0; s < (1 << m); ++s) out.blocks[popcount(static_cast<unsigned>(s))].push_back(s);
    return out;
}

inline std::vector<IndexList> sectors_by_popcount(int n_sites) {
    std::vector<IndexList> out(n_sites + 1);
    for (int s = 0; s < (1 << n_sites); ++s) out[popcount(static_cast<unsigned>(s))].push_back(s);
    return out;
}

// Probability of the up state for a site with field E at inverse temperature beta.
inline double up_probability(double E, double beta) {
    if (std::isinf(beta)) {
        if (E > 0.0) return 0.0;
        if (E < 0.0) return 1.0;
        return 0.5;
    }
    const double x = beta * E;
    if (x > 0.0) {
        const double e = std::exp(-x);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(x));
}

// Hamiltonian of the single-excitation sector in the basis |k> = up spin on site k.
inline Mat one_excitation_block(const ChainSpec& spec) {
    spec.validate();
    const int n = spec.N();
    double vac = 0.0;
    for (double e : spec.E) vac -= 0.5 * e;
    for (double f : spec.F) vac += f;
    Mat h = Mat::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        double d = vac + spec.E[k];
        if (k > 0) d -= 2.0 * spec.F[k - 1];
        if (k < n - 1) d -= 2.0 * spec.F[k];
        h(k, k) = d;
    }
    for (int b = 0; b < n - 1; ++b) {
        const cplx amp(2.0 * spec.J[b], 2.0 * spec.K[b]);
        h(b, b + 1) = amp;
        h(b + 1, b) = std::conj(amp);
    }
    return h;
}

inline double vacuum_energy(const ChainSpec& spec) {
    double vac = 0.0;
    for (double e : spec.E) vac -= 0.5 * e;
    for (double f : spec.F) vac += f;
    return vac;
}

}  // namespace spinmachine
