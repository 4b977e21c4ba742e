#include <gtest/gtest.h>

#include "oracle.hpp"
#include "spinmachine/mixing.hpp"

using namespace spinmachine;

namespace {

const CycleConfig kConfig{0.7, 1.6, 1.1, 0.7, StrokeMode::FourStroke};

ChainSpec cut_chain() {
    ChainSpec s = ChainSpec::uniform(5, 1.0, 1.0);
    s.E = {1.0, 0.8, 1.2, 0.9, 1.1};
    s.J[0] = s.J[3] = 0.0;
    return s;
}

DensityMatrix all_up(int sites) {
    const int d = 1 << sites;
    Mat m = Mat::Zero(d, d);
    m(d - 1, d - 1) = 1.0;
    return {m, site_range(1, sites)};
}

}  // namespace

TEST(Mixing, ConvexDecompositionRecombinesToChannel) {
    std::mt19937_64 rng(71);
    for (Target t : {Target::CB, Target::AC, Target::C}) {
        const ChannelHandle h = make_channel(make_fluid(oracle::random_chain(rng, 4)), kConfig, t);
        const auto parts = convex_decomposition(h);
        ASSERT_EQ(parts.size(), 4u);
        double total = 0.0;
        for (const auto& p : parts) {
            EXPECT_GE(p.weight, 0.0);
            total += p.weight;
        }
        EXPECT_NEAR(total, 1.0, 1e-15);
        const Mat rho = oracle::random_state(rng, h.dim());
        EXPECT_LT(oracle::max_abs(recombine(parts, rho) - apply_channel_matrix(h, rho)), 1e-14);
    }
}

TEST(Mixing, ZeroTemperatureChannelFixesVacuum) {
    std::mt19937_64 rng(72);
    const ChannelHandle h = zero_temperature_channel(make_fluid(oracle::random_chain(rng, 4)), kConfig);
    Mat vac = Mat::Zero(h.dim(), h.dim());
    vac(0, 0) = 1.0;
    EXPECT_LT(oracle::max_abs(apply_channel_matrix(h, vac) - vac), 1e-14);
    EXPECT_LT(oracle::max_abs(fixed_point(h).rho.matrix - vac), 1e-10);
}

TEST(Mixing, ConnectedChainHasNoFactorizedEigenvector) {
    ChainSpec s = ChainSpec::uniform(4, 1.0, 0.0, 0.8);
    s.E = {1.0, 1.2, 0.9, 1.4};
    s.J[1] = 0.6;
    const FluidPtr f = make_fluid(s);
    EXPECT_FALSE(factorized_eigenvector_test(*f).found);
    EXPECT_GT(spectral_gap(zero_temperature_channel(f, kConfig)), 1e-8);
}

TEST(Mixing, DisconnectedInteriorIsWitnessed) {
    const FluidPtr f = make_fluid(cut_chain());
    const FactorizedReport rep = factorized_eigenvector_test(*f);
    ASSERT_TRUE(rep.found);
    for (const auto& w : rep.witnesses) {
        EXPECT_GE(w.excitations, 1);
        EXPECT_NEAR(w.overlap, 1.0, 1e-10);
        // The witness is an eigenvector of the full Hamiltonian with A and B down.
        EXPECT_LT((f->H.matrix * w.vector - w.energy * w.vector).norm(), 1e-10);
        for (int s = 0; s < f->dim(); ++s)
            if (is_up(static_cast<unsigned>(s), 1, 5) || is_up(static_cast<unsigned>(s), 5, 5))
                EXPECT_LT(std::abs(w.vector(s)), 1e-10);
    }
    EXPECT_LT(spectral_gap(zero_temperature_channel(f, kConfig)), 1e-10);
}

TEST(Mixing, SurvivalProfileIsMonotone) {
    std::mt19937_64 rng(73);
    for (int k = 0; k < 3; ++k) {
        const FluidPtr f = make_fluid(oracle::random_chain(rng, 4, 0.3, 1.2));
        const SurvivalProfile sp = survival_profile(f, kConfig, all_up(3), 60);
        EXPECT_TRUE(sp.monotone());
        EXPECT_NEAR(sp.P(0, 60), 1.0, 1e-12);
        EXPECT_NEAR(sp.P(3, 0), 1.0, 1e-15);
    }
    const SurvivalProfile cut = survival_profile(make_fluid(cut_chain()), kConfig, all_up(4), 100);
    EXPECT_TRUE(cut.monotone());
    EXPECT_GT(cut.P(1, 100), 0.5);
}

TEST(Mixing, ContractionNormDecreasesWithCycles) {
    std::mt19937_64 rng(74);
    const FluidPtr f = make_fluid(oracle::random_chain(rng, 4, 0.3, 1.2));
    for (int n = 1; n <= 2; ++n) {
        double prev = contraction_norm(*f, kConfig, n, 0);
        EXPECT_NEAR(prev, 1.0, 1e-14);
        for (int m : {1, 5, 20, 80}) {
            const double q = contraction_norm(*f, kConfig, n, m);
            EXPECT_LE(q, prev + 1e-14);
            prev = q;
        }
    }
    EXPECT_GT(contraction_norm(*make_fluid(cut_chain()), kConfig, 1, 200), 0.99);
    EXPECT_THROW(contraction_norm(*f, kConfig, 0, 3), DomainError);
    EXPECT_THROW(contraction_norm(*f, kConfig, 1, -1), DomainError);
}

TEST(Mixing, DecompositionNeedsFiniteTemperature) {
    const ChannelHandle h =
        make_channel(make_fluid(ChainSpec::uniform(3, 1.0, 0.5)), {kInfiniteBeta, 1.0, 1.0, 1.0}, Target::CB);
    EXPECT_THROW(convex_decomposition(h), DomainError);
}
