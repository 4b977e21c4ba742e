#include <gtest/gtest.h>

#include "oracle.hpp"
#include "spinmachine/cycle.hpp"

using namespace spinmachine;

namespace {

CycleConfig random_config(std::mt19937_64& rng, StrokeMode mode = StrokeMode::FourStroke) {
    return {oracle::uniform(rng, 0.1, 3.0), oracle::uniform(rng, 0.1, 3.0), oracle::uniform(rng, 0.0, 5.0),
            oracle::uniform(rng, 0.0, 5.0), mode};
}

// Plain dense rendition of one CB cycle: attach A, evolve, swap B for its bath,
// evolve, discard A.
Mat reference_cb_cycle(const ChainSpec& s, const CycleConfig& c, const Mat& rho_cb) {
    const int n = s.N();
    const Mat h = oracle::chain_hamiltonian(s);
    const Mat u1 = oracle::propagator(h, c.tau1);
    const Mat u2 = oracle::propagator(h, c.second_evolution());
    const DensityMatrix ga = local_gibbs(s.E.front(), c.beta1, 1);
    const DensityMatrix gb = local_gibbs(s.E.back(), c.beta2, n);
    DensityMatrix x = tensor(ga, DensityMatrix{rho_cb, site_range(2, n)});
    x.matrix = u1 * x.matrix * u1.adjoint();
    x = tensor(partial_trace(x, site_range(1, n - 1)), gb);
    x.matrix = u2 * x.matrix * u2.adjoint();
    return partial_trace(x, site_range(2, n)).matrix;
}

}  // namespace

TEST(Cycle, EvolutionOperatorMatchesMatrixExponential) {
    std::mt19937_64 rng(31);
    for (int n = 2; n <= 4; ++n) {
        const ChainSpec s = oracle::random_chain(rng, n);
        const FluidPtr f = make_fluid(s);
        const double tau = oracle::uniform(rng, 0.0, 5.0);
        const Mat u = f->unitary(tau).dense();
        EXPECT_LT(oracle::max_abs(u - oracle::propagator(oracle::chain_hamiltonian(s), tau)), 1e-12);
        EXPECT_LT(oracle::max_abs(u * u.adjoint() - Mat::Identity(u.rows(), u.cols())), 1e-13);
    }
}

TEST(Cycle, NoSymEvolutionMatchesMatrixExponential) {
    const NoSymPairSpec p{0.9, -0.4, 0.3, 0.1, 0.25, -0.2, 0.6};
    const Mat u = make_fluid(p)->unitary(2.3).dense();
    EXPECT_LT(oracle::max_abs(u - oracle::propagator(oracle::nosym_hamiltonian(p), 2.3)), 1e-12);
}

TEST(Cycle, ChannelMatchesDenseReference) {
    std::mt19937_64 rng(32);
    for (int n = 2; n <= 4; ++n) {
        const ChainSpec s = oracle::random_chain(rng, n);
        const CycleConfig c = random_config(rng);
        const ChannelHandle h = make_channel(make_fluid(s), c, Target::CB);
        const Mat rho = oracle::random_state(rng, h.dim());
        EXPECT_LT(oracle::max_abs(apply_channel_matrix(h, rho) - reference_cb_cycle(s, c, rho)), 1e-12);
    }
}

TEST(Cycle, KrausOperatorsReproduceChannelOnEveryTarget) {
    std::mt19937_64 rng(33);
    for (int n = 3; n <= 4; ++n)
        for (Target t : {Target::CB, Target::AC, Target::C})
            for (StrokeMode mode : {StrokeMode::FourStroke, StrokeMode::TwoStroke}) {
                const ChannelHandle h = make_channel(make_fluid(oracle::random_chain(rng, n)), random_config(rng, mode), t);
                const auto ks = kraus_set(h);
                const Mat rho = oracle::random_state(rng, h.dim());
                EXPECT_LT(oracle::max_abs(apply_kraus(ks, rho) - apply_channel_matrix(h, rho)), 1e-13)
                    << "N = " << n << " target " << to_string(t);
                Mat completeness = Mat::Zero(h.dim(), h.dim());
                for (const auto& k : ks) completeness += k.R.adjoint() * k.R;
                EXPECT_LT(oracle::max_abs(completeness - Mat::Identity(h.dim(), h.dim())), 1e-13);
            }
}

TEST(Cycle, ChannelPreservesTraceAndPositivity) {
    std::mt19937_64 rng(34);
    const ChannelHandle h = make_channel(make_fluid(oracle::random_chain(rng, 4)), random_config(rng), Target::CB);
    for (int k = 0; k < 10; ++k) {
        const DensityMatrix out = apply_channel(h, {oracle::random_state(rng, h.dim()), h.sites()});
        EXPECT_NO_THROW(out.validate(1e-13, 1e-12, 1e-13));
    }
}

TEST(Cycle, FixedPointMethodsAgree) {
    std::mt19937_64 rng(35);
    for (int n = 2; n <= 4; ++n) {
        const ChannelHandle h = make_channel(make_fluid(oracle::random_chain(rng, n)), random_config(rng), Target::CB);
        const FixedPointResult direct = fixed_point(h, FixedPointMethod::Direct);
        const FixedPointResult eigen = fixed_point(h, FixedPointMethod::Eigen);
        const FixedPointResult power = fixed_point(h, FixedPointMethod::Power, 1e-13);
        EXPECT_LT(oracle::max_abs(direct.rho.matrix - eigen.rho.matrix), 1e-10);
        EXPECT_LT(oracle::max_abs(direct.rho.matrix - power.rho.matrix), 1e-10);
        EXPECT_LT(direct.residual, 1e-12);
        EXPECT_NO_THROW(direct.rho.validate(1e-12, 1e-10, 1e-12));
    }
}

TEST(Cycle, FixedPointIsLimitOfRepeatedChannel) {
    std::mt19937_64 rng(36);
    const ChainSpec s = oracle::random_chain(rng, 3);
    const CycleConfig c{0.8, 1.9, 1.1, 0.7, StrokeMode::FourStroke};
    const ChannelHandle h = make_channel(make_fluid(s), c, Target::CB);
    Mat rho = oracle::random_state(rng, h.dim());
    for (int k = 0; k < 4000; ++k) rho = reference_cb_cycle(s, c, rho);
    EXPECT_LT(oracle::max_abs(rho - fixed_point(h).rho.matrix), 1e-9);
}

TEST(Cycle, LimitCycleClosesOnItself) {
    std::mt19937_64 rng(37);
    for (StrokeMode mode : {StrokeMode::FourStroke, StrokeMode::TwoStroke}) {
        const LimitCycle lc = assemble_limit_cycle(make_fluid(oracle::random_chain(rng, 4)), random_config(rng, mode));
        EXPECT_LT(lc.loop_residual, 1e-11);
        EXPECT_LT(lc.relation_residual, 1e-10);
        EXPECT_LT(lc.residual, 1e-11);
    }
}

TEST(Cycle, TransientConvergesToLimitCycleHeat) {
    std::mt19937_64 rng(38);
    const ChainSpec s = oracle::random_chain(rng, 3);
    const CycleConfig c{0.5, 2.0, 1.3, 0.9, StrokeMode::FourStroke};
    const FluidPtr f = make_fluid(s);
    const auto rec = iterate_transient(f, c, maximally_mixed(site_range(1, 3)), 3000, false);
    const LimitCycle lc = assemble_limit_cycle(f, c);
    const Mat rho_a = reduce_to_front_site(lc.rho_ACB_star.matrix);
    const double q_h = s.E.front() * (sz_expectation(rho_a) - sz_expectation(lc.bath_A));
    EXPECT_NEAR(rec.back().Q_H, q_h, 1e-9);
    for (const auto& r : rec) EXPECT_NEAR(r.Q_H + r.Q_C + r.W + r.energy_end - r.energy_start, 0.0, 1e-12);
}

TEST(Cycle, TwoStrokeHasNoSecondEvolution) {
    const CycleConfig c{1.0, 1.0, 2.0, 7.0, StrokeMode::TwoStroke};
    EXPECT_EQ(c.second_evolution(), 0.0);
    const ChannelHandle h = make_channel(make_fluid(ChainSpec::uniform(3, 1.0, 0.4)), c, Target::AC);
    EXPECT_LT(oracle::max_abs(h.U2.dense() - Mat::Identity(8, 8)), 1e-15);
}

TEST(Cycle, SpectralGapLiesInUnitInterval) {
    std::mt19937_64 rng(39);
    for (int k = 0; k < 5; ++k) {
        const ChannelHandle h = make_channel(make_fluid(oracle::random_chain(rng, 3)), random_config(rng), Target::CB);
        const double gap = spectral_gap(h);
        EXPECT_GE(gap, -1e-12);
        EXPECT_LE(gap, 1.0 + 1e-12);
        EXPECT_NEAR(gap, spectral_gap_of(superoperator_matrix(h)), 1e-10);
    }
}

TEST(Cycle, InvalidInputsThrow) {
    EXPECT_THROW((CycleConfig{-1.0, 1.0, 1.0, 1.0}.validate()), DomainError);
    EXPECT_THROW((CycleConfig{1.0, 1.0, std::nan(""), 1.0}.validate()), DomainError);
    EXPECT_THROW((CycleConfig{1.0, 1.0, 1.0, -2.0}.validate()), DomainError);
    const ChannelHandle h = make_channel(make_fluid(ChainSpec::uniform(3, 1.0, 0.4)), CycleConfig{}, Target::CB);
    EXPECT_THROW(apply_channel(h, maximally_mixed({1, 2})), DomainError);
    EXPECT_THROW(apply_channel_matrix(h, Mat::Identity(8, 8)), DomainError);
    const CycleConfig cold{kInfiniteBeta, 1.0, 1.0, 1.0};
    EXPECT_THROW(kraus_set(make_channel(make_fluid(ChainSpec::uniform(3, 1.0, 0.4)), cold, Target::CB)), DomainError);
}
