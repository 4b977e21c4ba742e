#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "spinmachine/cycle.hpp"

namespace spinmachine {

enum class Regime { E, R, A, H, Degenerate };

inline const char* to_string(Regime r) {
    switch (r) {
        case Regime::E: return "E";
        case Regime::R: return "R";
        case Regime::A: return "A";
        case Regime::H: return "H";
        default: return "D";
    }
}

struct CycleThermo {
    double Q_H_star = 0.0;
    double Q_C_star = 0.0;
    double W_star = 0.0;
    double clausius_star = 0.0;
    // Work summed from the four quench terms, independent of the heats.
    double W_quench = 0.0;
    Regime regime = Regime::Degenerate;
    std::optional<double> efficiency;
    std::optional<double> cop;

    double first_law_residual() const { return std::abs(Q_H_star + Q_C_star + W_quench); }
};

inline double default_zero_tol(double E1, double EN) { return 1e-9 * std::max(std::abs(E1), std::abs(EN)); }

inline Regime classify_regime(double Q_H, double Q_C, double W, double zero_tol) {
    if (std::abs(Q_H) < zero_tol || std::abs(Q_C) < zero_tol || std::abs(W) < zero_tol) return Regime::Degenerate;
    if (Q_H < 0 && Q_C > 0 && W > 0) return Regime::E;
    if (Q_H > 0 && Q_C < 0 && W < 0) return Regime::R;
    if (Q_H < 0 && Q_C > 0 && W < 0) return Regime::A;
    if (Q_H > 0 && Q_C > 0 && W < 0) return Regime::H;
    throw InconsistencyError("classify_regime: sign pattern (" + std::to_string(Q_H) + ", " + std::to_string(Q_C) +
                             ", " + std::to_string(W) + ") violates the first or second law");
}

// Regime labels refer to the hotter bath; when beta1 > beta2 the roles of the
// two ends are exchanged.
inline Regime predicted_regime(double E1, double EN, double beta1, double beta2) {
    if (beta1 > beta2) return predicted_regime(EN, E1, beta2, beta1);
    if (E1 == 0.0) throw DomainError("predicted_regime: E1 = 0 leaves the ratio undefined");
    const double r = EN / E1;
    const double c = beta1 / beta2;
    const double eps = 1e-12;
    if (std::abs(r) < eps || std::abs(r - c) < eps || std::abs(r - 1.0) < eps) return Regime::Degenerate;
    if (r < 0) return Regime::H;
    if (r < c) return Regime::R;
    if (r < 1) return Regime::E;
    return Regime::A;
}

inline void fill_regime(CycleThermo& t, double beta1, double beta2, double zero_tol) {
    t.clausius_star = beta1 * t.Q_H_star + beta2 * t.Q_C_star;
    const bool swapped = beta1 > beta2;
    const double q_hot = swapped ? t.Q_C_star : t.Q_H_star;
    const double q_cold = swapped ? t.Q_H_star : t.Q_C_star;
    t.regime = classify_regime(q_hot, q_cold, t.W_star, zero_tol);
    t.efficiency.reset();
    t.cop.reset();
    if (t.regime == Regime::E) t.efficiency = t.W_star / std::abs(q_hot);
    if (t.regime == Regime::R) t.cop = std::abs(q_cold) / std::abs(t.W_star);
}

inline CycleThermo limit_cycle_thermo(const LimitCycle& lc, const WorkingFluid& f) {
    CycleThermo t;
    const Mat rho_a = reduce_to_front_site(lc.rho_ACB_star.matrix);
    const Mat rho_b = reduce_to_back_site(lc.rho_ACB_tilde_star.matrix);
    t.Q_H_star = f.E1 * (sz_expectation(rho_a) - sz_expectation(lc.bath_A));
    t.Q_C_star = f.EN * (sz_expectation(rho_b) - sz_expectation(lc.bath_B));
    t.W_star = -(t.Q_H_star + t.Q_C_star);
    const Mat start = kron_front(lc.bath_A, lc.rho_CB_star.matrix);
    const Mat before_b = kron_back(lc.rho_AC_star.matrix, lc.bath_B);
    t.W_quench = sparse_expectation(f.H_AC, lc.rho_ACB_star.matrix) - sparse_expectation(f.H_AC, start) +
                 sparse_expectation(f.H_CB, lc.rho_ACB_tilde_star.matrix) - sparse_expectation(f.H_CB, before_b);
    fill_regime(t, lc.config.beta1, lc.config.beta2, default_zero_tol(f.E1, f.EN));
    return t;
}

inline double heat_symmetry_residual(const CycleThermo& t, double E1, double EN) {
    if (E1 == 0.0 || EN == 0.0) throw DomainError("heat_symmetry_residual: zero local energy");
    return std::abs(t.Q_H_star / E1 + t.Q_C_star / EN);
}

// g = p(beta1 E1) - p(beta2 EN) with p(x) = 1/(e^x + 1), the stable form of
// (e^{b2 EN} - e^{b1 E1}) / ((e^{b2 EN} + 1)(e^{b1 E1} + 1)).
inline double g_function(double E1, double EN, double beta1, double beta2) {
    return up_probability(E1, beta1) - up_probability(EN, beta2);
}

struct AnsatzDecomposition {
    double g_value = 0.0;
    double f4_value = 0.0;
    double f4_from_hot = 0.0;
    bool valid = false;
    bool consistent = false;
};

inline AnsatzDecomposition extract_ansatz(const CycleThermo& t, double E1, double EN, double beta1, double beta2) {
    AnsatzDecomposition a;
    a.g_value = g_function(E1, EN, beta1, beta2);
    if (std::abs(a.g_value) < 1e-12 || E1 == 0.0 || EN == 0.0) return a;
    a.valid = true;
    a.f4_value = t.Q_C_star / (a.g_value * EN);
    a.f4_from_hot = -t.Q_H_star / (a.g_value * E1);
    a.consistent = std::abs(a.f4_value - a.f4_from_hot) < 1e-8;
    return a;
}

inline CycleThermo run_cycle_thermo(FluidPtr fluid, const CycleConfig& config, const LimitCycleOptions& opt = {}) {
    const LimitCycle lc = assemble_limit_cycle(fluid, config, opt);
    return limit_cycle_thermo(lc, *fluid);
}

}  // namespace spinmachine
