#include <gtest/gtest.h>

#include "oracle.hpp"
#include "spinmachine/lowtemp.hpp"

using namespace spinmachine;

namespace {

ChainSpec exchange_chain(std::mt19937_64& rng, int n, bool complex_coupling = false) {
    ChainSpec s = ChainSpec::uniform(n, 0.0, 0.0);
    for (double& e : s.E) e = oracle::uniform(rng, 0.5, 2.0);
    for (double& j : s.J) j = oracle::uniform(rng, 0.2, 1.0);
    if (complex_coupling)
        for (double& k : s.K) k = oracle::uniform(rng, -0.5, 0.5);
    for (double& f : s.F) f = oracle::uniform(rng, -0.3, 0.3);
    return s;
}

}  // namespace

TEST(LowTemp, SectorUnitaryIsRestrictionOfFullPropagator) {
    std::mt19937_64 rng(61);
    for (int n = 2; n <= 5; ++n) {
        const ChainSpec s = exchange_chain(rng, n, n % 2 == 1);
        const double tau = oracle::uniform(rng, 0.0, 4.0);
        const Mat u = oracle::propagator(oracle::chain_hamiltonian(s), tau);
        IndexList idx;
        for (int k = 1; k <= n; ++k) idx.push_back(1 << (n - k));
        const OneExcitationSector sec = one_excitation_unitary(s, tau);
        EXPECT_LT(oracle::max_abs(sec.U1 - u(idx, idx)), 1e-12);
        EXPECT_LT(std::abs(sec.vacuum_phase - u(0, 0)), 1e-12);
        EXPECT_LT(sec.unitarity_residual(), 1e-13);
        EXPECT_LT(sec.conservation_residual(), 1e-13);
    }
}

TEST(LowTemp, SteinSolutionSatisfiesEquation) {
    std::mt19937_64 rng(62);
    const OneExcitationSector sec = one_excitation_unitary(exchange_chain(rng, 8, true), 1.7);
    const Mat V = sec.V();
    const Vec c = sec.injected(1);
    const Mat D = stein_solve(V, c);
    EXPECT_LT(oracle::max_abs(D - V * D * V.adjoint() - c * c.adjoint()), 1e-12);
    long terms = 0;
    double tail = 0.0;
    const Mat S = stein_series(V, c, terms, tail);
    EXPECT_LT(oracle::max_abs(S - D), 1e-10);
    EXPECT_GT(terms, 0);
}

TEST(LowTemp, SeriesAndLinearRoutesAgree) {
    std::mt19937_64 rng(63);
    for (int n : {3, 5, 10, 30})
        for (int k = 0; k < 3; ++k) {
            const ChainSpec s = exchange_chain(rng, n, k == 2);
            const double tau = oracle::uniform(rng, 0.3, 4.0);
            const F2Result lin = f2_lowtemp(s, tau, SectorMethod::Linear);
            EXPECT_GE(lin.f2, -1e-12);
            EXPECT_LE(lin.f2, 1.0 + 1e-12);
            const F2Result ser = LowTempSweeper(s).evaluate(tau, 100000);
            if (ser.converged) {
                EXPECT_NEAR(lin.f2, ser.f2, 1e-10) << "N = " << n;
            } else {
                // Slowly mixing chains stop at the budget with a rigorous bracket.
                EXPECT_LE(ser.f2_lower, lin.f2 + 1e-12) << "N = " << n;
                EXPECT_GE(ser.f2_upper, lin.f2 - 1e-12) << "N = " << n;
            }
        }
}

TEST(LowTemp, BudgetedSeriesBracketsConvergedValue) {
    std::mt19937_64 rng(64);
    const ChainSpec s = exchange_chain(rng, 40);
    const double exact = f2_lowtemp(s, 2.1, SectorMethod::Linear).f2;
    const LowTempSweeper sweeper(s);
    for (long budget : {1L, 10L, 100L, 1000L}) {
        const F2Result r = sweeper.evaluate(2.1, budget);
        EXPECT_LE(r.f2_lower, exact + 1e-12) << budget;
        EXPECT_GE(r.f2_upper, exact - 1e-12) << budget;
        EXPECT_NEAR(r.f2_upper - r.f2_lower, r.tail_bound, 1e-12);
    }
}

TEST(LowTemp, SecondSiteCountsAsTransferForTwoSites) {
    const ChainSpec s = ChainSpec::uniform(2, 1.0, 0.3);
    for (double tau : {0.0, 0.7, 2.5}) {
        const F2Result r = f2_lowtemp(s, tau);
        EXPECT_NEAR(r.f2, std::norm(oracle::propagator(oracle::chain_hamiltonian(s), tau)(1, 2)), 1e-13);
    }
}

TEST(LowTemp, ThreeSiteMatchesClosedFormResult) {
    // Two-stroke f2 of a three-site exchange chain from the dense propagator.
    std::mt19937_64 rng(65);
    for (int k = 0; k < 10; ++k) {
        ChainSpec s = ChainSpec::uniform(3, 0.0, 0.0);
        for (double& e : s.E) e = oracle::uniform(rng, -2, 2);
        for (double& j : s.J) j = oracle::uniform(rng, -2, 2);
        const double tau = oracle::uniform(rng, 0.0, 6.0);
        const Mat u = oracle::propagator(oracle::chain_hamiltonian(s), tau);
        const double a = std::norm(u(4, 2)), b = std::norm(u(2, 1)), c = std::norm(u(1, 4));
        if (a + b < 1e-12) continue;
        EXPECT_NEAR(f2_lowtemp(s, tau).f2, (a * b + b * c + c * a) / (a + b), 1e-11);
    }
}

TEST(LowTemp, ChiCoefficientsAreAntisymmetric) {
    std::mt19937_64 rng(66);
    for (int n = 2; n <= 8; ++n) {
        const OneExcitationSector s = one_excitation_unitary(exchange_chain(rng, n, n % 2 == 0), 1.3);
        const ChiCoefficients chi = chi_coefficients(s);
        EXPECT_LT(chi.symmetry_residual(), 1e-12) << "N = " << n;
        EXPECT_NEAR(chi.chi_B1, f2_from_correction(s, delta_rho_star(s, 1)).f2, 1e-12);
    }
}

TEST(LowTemp, ExcitationCorrectionIsTraceless) {
    std::mt19937_64 rng(67);
    const OneExcitationSector s = one_excitation_unitary(exchange_chain(rng, 7), 0.9);
    const ExcitationCorrection corr = delta_rho_star(s, 2);
    EXPECT_NEAR(corr.delta_rho.trace().real(), 0.0, 1e-14);
    EXPECT_GE(corr.p.minCoeff(), -1e-12);
    EXPECT_NEAR(corr.p.sum(), 1.0, 1e-12);
    // Fixed point of the zero-temperature channel after the injection.
    const SectorChannel ch = zero_temp_channel_1ex(s);
    Mat injected = Mat::Zero(ch.dim(), ch.dim());
    injected.block(1, 1, s.c_size(), s.c_size()) = s.injected(2) * s.injected(2).adjoint();
    const Mat lhs = corr.delta_rho;
    Mat rhs = ch.apply(lhs);
    rhs.block(1, 1, s.c_size(), s.c_size()) += injected.block(1, 1, s.c_size(), s.c_size());
    EXPECT_LT(oracle::max_abs(lhs.block(1, 1, s.c_size(), s.c_size()) - rhs.block(1, 1, s.c_size(), s.c_size())),
              1e-12);
}

TEST(LowTemp, SectorChannelPreservesTrace) {
    std::mt19937_64 rng(68);
    const SectorChannel ch = zero_temp_channel_1ex(exchange_chain(rng, 6, true), 2.2);
    const Mat rho = oracle::random_state(rng, ch.dim());
    const Mat out = ch.apply(rho);
    EXPECT_NEAR(out.trace().real(), 1.0, 1e-14);
    EXPECT_LT(oracle::max_abs(out - out.adjoint()), 1e-15);
    EXPECT_THROW(ch.apply(Mat::Identity(2, 2)), DomainError);
}

TEST(LowTemp, FirstOrderHeatsHaveSignOfTemperatureOrder) {
    const LowTempParams x{0.2, 0.05};
    const CycleThermo t = lowtemp_thermo(0.6, 1.0, 0.8, x, 1.0, 2.0);
    EXPECT_NEAR(t.Q_C_star, 0.15 * 0.6 * 0.8, 1e-15);
    EXPECT_NEAR(t.Q_H_star, -0.15 * 0.6 * 1.0, 1e-15);
    EXPECT_NEAR(t.Q_H_star + t.Q_C_star + t.W_star, 0.0, 1e-15);
    EXPECT_EQ(t.regime, Regime::E);
}

TEST(LowTemp, FirstOrderMatchesDenseLimitCycle) {
    std::mt19937_64 rng(69);
    const ChainSpec s = exchange_chain(rng, 4);
    const double tau = 1.4;
    const double f2 = f2_lowtemp(s, tau).f2;
    double prev = std::numeric_limits<double>::infinity();
    for (double scale : {6.0, 9.0, 12.0}) {
        const double b1 = scale / s.E.front(), b2 = scale / s.E.back() * 1.3;
        const LowTempParams x = LowTempParams::from_betas(s.E.front(), s.E.back(), b1, b2);
        const CycleThermo num = run_cycle_thermo(make_fluid(s), {b1, b2, tau, 0.0, StrokeMode::TwoStroke});
        const CycleThermo lt = lowtemp_thermo(f2, s.E.front(), s.E.back(), x, b1, b2);
        const double rel = std::abs(num.Q_C_star - lt.Q_C_star) / std::abs(lt.Q_C_star);
        EXPECT_LT(rel, 2.0 * x.x1);
        EXPECT_LT(rel, prev);
        prev = rel;
    }
}

TEST(LowTemp, InvalidInputsThrow) {
    EXPECT_THROW((LowTempParams{1.0, 0.1}.validate()), DomainError);
    EXPECT_THROW((LowTempParams{-0.1, 0.1}.validate()), DomainError);
    EXPECT_THROW(LowTempParams::from_betas(-1.0, 1.0, 1.0, 1.0), DomainError);
    EXPECT_THROW(delta_rho_star(ChainSpec::uniform(4, 1.0, 0.5), 1.0, 3), DomainError);
    const ChainSpec long_chain = ChainSpec::uniform(300, 1.0, 1.0);
    EXPECT_THROW(f2_lowtemp(long_chain, 3.0, SectorMethod::Series, 5), ConvergenceError);
}
