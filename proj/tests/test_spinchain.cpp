#include <gtest/gtest.h>

#include "oracle.hpp"
#include "spinmachine/quantumstate.hpp"

using namespace spinmachine;

TEST(SpinChain, HamiltonianMatchesPauliKroneckerSum) {
    std::mt19937_64 rng(11);
    for (int n = 2; n <= 5; ++n)
        for (int k = 0; k < 5; ++k) {
            const ChainSpec s = oracle::random_chain(rng, n);
            const Mat h = build_hamiltonian(s).matrix;
            EXPECT_LT(oracle::max_abs(h - oracle::chain_hamiltonian(s)), 1e-13) << "N = " << n;
        }
}

TEST(SpinChain, NoSymHamiltonianMatchesPauliKroneckerSum) {
    std::mt19937_64 rng(12);
    for (int k = 0; k < 20; ++k) {
        NoSymPairSpec p;
        p.E1 = oracle::uniform(rng, -2, 2);
        p.E2 = oracle::uniform(rng, -2, 2);
        p.J_R = oracle::uniform(rng, -1, 1);
        p.J_I = oracle::uniform(rng, -1, 1);
        p.K_R = oracle::uniform(rng, -1, 1);
        p.K_I = oracle::uniform(rng, -1, 1);
        p.F = oracle::uniform(rng, -1, 1);
        EXPECT_LT(oracle::max_abs(build_nosym_hamiltonian(p).matrix - oracle::nosym_hamiltonian(p)), 1e-13);
    }
}

TEST(SpinChain, TermsSumToFullHamiltonian) {
    std::mt19937_64 rng(13);
    const ChainSpec s = oracle::random_chain(rng, 4);
    Mat sum = Mat::Zero(16, 16);
    for (int i = 1; i <= 4; ++i) sum += site_hamiltonian(s, i);
    for (int b = 1; b <= 3; ++b) sum += bond_hamiltonian(s, b);
    EXPECT_LT(oracle::max_abs(sum - build_hamiltonian(s).matrix), 1e-14);
}

TEST(SpinChain, ChainCommutesWithTotalMagnetization) {
    std::mt19937_64 rng(14);
    for (int n = 2; n <= 5; ++n) {
        const Mat h = build_hamiltonian(oracle::random_chain(rng, n)).matrix;
        const Mat m = magnetization_operator(site_range(1, n), n).matrix;
        EXPECT_LT(oracle::max_abs(h * m - m * h), 1e-13);
        EXPECT_LT(oracle::max_abs(h - h.adjoint()), 1e-14);
    }
}

TEST(SpinChain, PairTermsBreakMagnetizationOnlyWhenPresent) {
    NoSymPairSpec p{0.7, -1.3, 0.4, 0.2, 0.0, 0.0, 0.5};
    const Mat m = magnetization_operator({1, 2}, 2).matrix;
    Hamiltonian h = build_nosym_hamiltonian(p);
    EXPECT_TRUE(h.conserves_magnetization);
    EXPECT_LT(oracle::max_abs(h.matrix * m - m * h.matrix), 1e-14);
    p.K_R = 0.3;
    h = build_nosym_hamiltonian(p);
    EXPECT_FALSE(h.conserves_magnetization);
    EXPECT_GT(oracle::max_abs(h.matrix * m - m * h.matrix), 0.1);
}

TEST(SpinChain, NoSymWithoutPairTermsEqualsChain) {
    const NoSymPairSpec p{0.7, -1.3, 0.4, 0.2, 0.0, 0.0, 0.5};
    EXPECT_LT(oracle::max_abs(build_nosym_hamiltonian(p).matrix - build_hamiltonian(nosym_as_chain(p)).matrix), 1e-14);
    NoSymPairSpec q = p;
    q.K_I = 0.1;
    EXPECT_THROW(nosym_as_chain(q), DomainError);
}

TEST(SpinChain, OneExcitationBlockIsRestrictionOfFullHamiltonian) {
    std::mt19937_64 rng(15);
    for (int n = 2; n <= 6; ++n) {
        const ChainSpec s = oracle::random_chain(rng, n);
        const Mat h = oracle::chain_hamiltonian(s);
        IndexList idx;
        for (int k = 1; k <= n; ++k) idx.push_back(1 << (n - k));
        EXPECT_LT(oracle::max_abs(one_excitation_block(s) - h(idx, idx)), 1e-13);
        EXPECT_NEAR(vacuum_energy(s), h(0, 0).real(), 1e-13);
    }
}

TEST(SpinChain, UpProbability) {
    EXPECT_DOUBLE_EQ(up_probability(1.0, 0.0), 0.5);
    EXPECT_NEAR(up_probability(2.0, 0.5), 1.0 / (1.0 + std::exp(1.0)), 1e-16);
    for (double e : {-3.0, -0.2, 0.0, 0.9, 40.0})
        EXPECT_NEAR(up_probability(e, 1.3) + up_probability(-e, 1.3), 1.0, 1e-15);
    EXPECT_EQ(up_probability(1.0, kInfiniteBeta), 0.0);
    EXPECT_EQ(up_probability(-1.0, kInfiniteBeta), 1.0);
    EXPECT_GE(up_probability(1000.0, 1.0), 0.0);
    EXPECT_TRUE(std::isfinite(up_probability(-1000.0, 1.0)));
}

TEST(SpinChain, ExcitationBlocksPartitionBasis) {
    const auto b = excitation_blocks({2, 3, 4}, 4);
    ASSERT_EQ(b.blocks.size(), 4u);
    std::size_t total = 0;
    for (std::size_t k = 0; k < b.blocks.size(); ++k) {
        total += b.blocks[k].size();
        for (int s : b.blocks[k]) EXPECT_EQ(popcount(static_cast<unsigned>(s)), static_cast<int>(k));
    }
    EXPECT_EQ(total, 8u);
}

TEST(SpinChain, InvalidInputsThrow) {
    ChainSpec s = ChainSpec::uniform(3, 1.0, 1.0);
    s.J.pop_back();
    EXPECT_THROW(s.validate(), DomainError);
    ChainSpec one;
    one.E = {1.0};
    EXPECT_THROW(one.validate(), DomainError);
    ChainSpec nan = ChainSpec::uniform(2, 1.0, 1.0);
    nan.F[0] = std::nan("");
    EXPECT_THROW(build_hamiltonian(nan), DomainError);
    EXPECT_THROW(build_hamiltonian(ChainSpec::uniform(kDenseSiteCap + 1, 1.0, 1.0)), SizeError);
    EXPECT_THROW(magnetization_operator({0}, 3), DomainError);
    EXPECT_THROW(magnetization_operator({1, 1}, 3), DomainError);
}
