#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/SVD>

#include "spinmachine/cycle.hpp"

namespace spinmachine {

struct WeightedChannel {
    double weight = 0.0;
    int i = 0;   // bath-A level
    int j = 0;   // bath-B level
    ChannelHandle channel;
};

inline Mat pure_bath(int level) {
    Mat m = Mat::Zero(2, 2);
    m(level, level) = 1.0;
    return m;
}

// Splits the channel into the four sub-channels with pure bath levels.
inline std::vector<WeightedChannel> convex_decomposition(const ChannelHandle& h) {
    if (!std::isfinite(h.config.beta1) || !std::isfinite(h.config.beta2))
        throw DomainError("convex_decomposition: needs finite beta");
    std::vector<WeightedChannel> out;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            WeightedChannel w;
            w.weight = h.bath_A(i, i).real() * h.bath_B(j, j).real();
            w.i = i;
            w.j = j;
            w.channel = make_channel(h.fluid, h.config, h.target, pure_bath(i), pure_bath(j));
            out.push_back(std::move(w));
        }
    return out;
}

inline Mat recombine(const std::vector<WeightedChannel>& parts, const Mat& rho) {
    Mat out = Mat::Zero(rho.rows(), rho.cols());
    for (const auto& p : parts) out += p.weight * apply_channel_matrix(p.channel, rho);
    return out;
}

inline ChannelHandle zero_temperature_channel(FluidPtr fluid, const CycleConfig& config, Target target = Target::CB) {
    return make_channel(std::move(fluid), config, target, pure_bath(0), pure_bath(0));
}

struct FactorizedWitness {
    int excitations = 0;
    double energy = 0.0;
    double overlap = 0.0;
    Vec vector;   // full-chain amplitudes
};

struct FactorizedReport {
    bool found = false;
    std::vector<FactorizedWitness> witnesses;
};

// Looks for eigenvectors of the form |0>_A |phi>_C |0>_B with at least one
// excitation in C; degenerate eigenspaces are tested through the largest
// overlap of the eigenspace with that subspace.
inline FactorizedReport factorized_eigenvector_test(const WorkingFluid& f, double purity_tol = 1e-10) {
    const int n = f.N();
    const SpectralData& sd = f.spectrum;
    const double scale = std::max(1.0, max_abs(f.H.matrix));
    FactorizedReport rep;
    for (std::size_t s = 0; s < sd.sectors.size(); ++s) {
        const IndexList& idx = sd.sectors[s];
        IndexList inside;
        for (int r = 0; r < static_cast<int>(idx.size()); ++r) {
            const unsigned u = static_cast<unsigned>(idx[r]);
            if (!is_up(u, 1, n) && !is_up(u, n, n) && u != 0u) inside.push_back(r);
        }
        if (inside.empty()) continue;
        const RVec& e = sd.energies[s];
        const Mat& v = sd.vectors[s];
        int start = 0;
        while (start < e.size()) {
            int stop = start + 1;
            while (stop < e.size() && std::abs(e(stop) - e(start)) < 1e-9 * scale) ++stop;
            const Mat block = v.middleCols(start, stop - start);
            const Mat restricted = block(inside, Eigen::all);
            Eigen::JacobiSVD<Mat> svd(restricted, Eigen::ComputeThinV);
            const double overlap = svd.singularValues()(0) * svd.singularValues()(0);
            if (overlap > 1.0 - purity_tol) {
                FactorizedWitness w;
                w.excitations = popcount(static_cast<unsigned>(idx[inside.front()]));
                w.energy = e(start);
                w.overlap = overlap;
                const Vec local = block * svd.matrixV().col(0);
                w.vector = Vec::Zero(f.dim());
                for (int r = 0; r < static_cast<int>(idx.size()); ++r) w.vector(idx[r]) = local(r);
                rep.witnesses.push_back(std::move(w));
            }
            start = stop;
        }
    }
    rep.found = !rep.witnesses.empty();
    return rep;
}

struct SurvivalProfile {
    RMat P;   // P(n, m), n = 0..|CB|, m = 0..m_max
    double monotone_n_violation = 0.0;
    double monotone_m_violation = 0.0;

    bool monotone(double slack = 1e-12) const {
        return monotone_n_violation <= slack && monotone_m_violation <= slack;
    }
};

// Fraction of population with at least n excitations in CB after m cycles of
// the zero-temperature CB channel.
inline SurvivalProfile survival_profile(FluidPtr fluid, const CycleConfig& config, const DensityMatrix& rho0,
                                        int m_max) {
    const ChannelHandle h = zero_temperature_channel(fluid, config, Target::CB);
    if (rho0.dim() != h.dim()) throw DomainError("survival_profile: rho0 must live on CB");
    const int sites = h.subsystem_sites();
    const auto label = excitation_labels(sites);
    const MagnetizationBlocks blocks = excitation_blocks(site_range(1, sites), sites);
    Mat rho = block_decompose(rho0.matrix, blocks).bd;
    SurvivalProfile out;
    out.P = RMat::Zero(sites + 1, m_max + 1);
    for (int m = 0; m <= m_max; ++m) {
        RVec pop = RVec::Zero(sites + 1);
        for (int s = 0; s < h.dim(); ++s) pop(label[s]) += rho(s, s).real();
        double acc = 0.0;
        for (int k = sites; k >= 0; --k) {
            acc += pop(k);
            out.P(k, m) = acc;
        }
        if (m < m_max) rho = apply_channel_matrix(h, rho);
    }
    for (int m = 0; m <= m_max; ++m)
        for (int k = 1; k <= sites; ++k) {
            out.monotone_n_violation = std::max(out.monotone_n_violation, out.P(k, m) - out.P(k - 1, m));
            if (m > 0) out.monotone_m_violation = std::max(out.monotone_m_violation, out.P(k, m) - out.P(k, m - 1));
        }
    return out;
}

// Largest squared singular value of (P2 P1)^dm on the n-excitation sector,
// acting on states with site A down. P1 projects B on |0> after U(tau1), P2
// projects A on |0> after the second evolution.
inline double contraction_norm(const WorkingFluid& f, const CycleConfig& config, int n, int delta_m) {
    if (n < 1) throw DomainError("contraction_norm: need n >= 1");
    if (delta_m < 0) throw DomainError("contraction_norm: need delta_m >= 0");
    const int sites = f.N();
    IndexList sector;
    for (int s = 0; s < f.dim(); ++s)
        if (popcount(static_cast<unsigned>(s)) == n) sector.push_back(s);
    if (sector.empty()) throw DomainError("contraction_norm: empty excitation sector");
    const int d = static_cast<int>(sector.size());
    RVec a_down(d), b_down(d);
    for (int k = 0; k < d; ++k) {
        a_down(k) = is_up(static_cast<unsigned>(sector[k]), 1, sites) ? 0.0 : 1.0;
        b_down(k) = is_up(static_cast<unsigned>(sector[k]), sites, sites) ? 0.0 : 1.0;
    }
    const Mat u1 = f.unitary(config.tau1).dense()(sector, sector);
    const Mat u2 = f.unitary(config.second_evolution()).dense()(sector, sector);
    const Mat step = a_down.cast<cplx>().asDiagonal() * u2 * b_down.cast<cplx>().asDiagonal() * u1;
    Mat prod = a_down.cast<cplx>().asDiagonal();
    for (int k = 0; k < delta_m; ++k) prod = step * prod;
    Eigen::JacobiSVD<Mat> svd(prod);
    const double s = svd.singularValues()(0);
    return std::min(1.0, s * s);
}

}  // namespace spinmachine
