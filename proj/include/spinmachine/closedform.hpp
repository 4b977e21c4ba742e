#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "spinmachine/cycle.hpp"
#include "spinmachine/thermo.hpp"

namespace spinmachine {

// Multiplier between the chain couplings J, K of the Hamiltonian and the
// couplings entering the analytic two-site formulas. Fixed by calibration
// against the numerical fixed point (see tests/test_closedform.cpp).
inline constexpr double kCouplingScale = 4.0;

// sin(x)/x with the removable singularity handled analytically.
inline double sinc(double x) {
    if (std::abs(x) < 1e-4) {
        const double x2 = x * x;
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
    }
    return std::sin(x) / x;
}

// Two-level Rabi data for a block with level splitting `split` and complex
// coupling (x + i y) * scale.
struct RabiPair {
    double split = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    double omega = 0.0;

    RabiPair() = default;
    RabiPair(double split_, double x, double y, double scale = kCouplingScale)
        : split(split_), cx(scale * x), cy(scale * y),
          omega(0.5 * std::sqrt(split_ * split_ + cx * cx + cy * cy)) {}

    double coupling2() const { return cx * cx + cy * cy; }

    // sin(omega tau) / omega, finite at omega = 0.
    double sin_over_omega(double tau) const { return tau * sinc(omega * tau); }

    cplx C(double tau) const {
        return {std::cos(omega * tau), 0.5 * split * sin_over_omega(tau)};
    }

    cplx S(double tau) const { return -0.5 * sin_over_omega(tau) * cplx(cx, -cy); }

    // Transition probability |S|^2.
    double transfer(double tau) const {
        const double so = sin_over_omega(tau);
        return 0.25 * coupling2() * so * so;
    }
};

// ---- N = 2 magnetization-preserving chain ----

struct N2Constants {
    RabiPair block;

    double omega() const { return block.omega; }
    double W2() const { return block.coupling2(); }
    cplx C_H(double tau) const { return block.C(tau); }
    cplx S_H(double tau) const { return block.S(tau); }
};

inline void require_pair(const ChainSpec& spec) {
    spec.validate();
    if (spec.N() != 2) throw DomainError("two-site closed form needs N = 2");
}

inline N2Constants n2_constants(const ChainSpec& spec, double scale = kCouplingScale) {
    require_pair(spec);
    return {RabiPair(spec.E[1] - spec.E[0], spec.J[0], spec.K[0], scale)};
}

inline double f4_from_transfers(double s1, double s2) {
    const double den = 1.0 - s1 * s2;
    if (den < 1e-14) throw DomainError("f4: both strokes transfer the excitation completely, no unique fixed point");
    return (s1 + s2 - 2.0 * s1 * s2) / den;
}

inline double n2_f4(const ChainSpec& spec, double tau1, double tau2, double scale = kCouplingScale) {
    const N2Constants c = n2_constants(spec, scale);
    return f4_from_transfers(c.block.transfer(tau1), c.block.transfer(tau2));
}

// Fixed point of the CB channel (here the state of site 2).
inline DensityMatrix n2_fixed_point(const ChainSpec& spec, const CycleConfig& config) {
    const N2Constants c = n2_constants(spec);
    const double s1 = c.block.transfer(config.tau1);
    const double s2 = c.block.transfer(config.second_evolution());
    const double den = 1.0 - s1 * s2;
    if (!(den > 0.0)) throw DomainError("n2_fixed_point: degenerate denominator");
    const double a = up_probability(spec.E[0], config.beta1);
    const double b = up_probability(spec.E[1], config.beta2);
    const double p = (b * (1.0 - s2) + a * s2 * (1.0 - s1)) / den;
    Mat m = Mat::Zero(2, 2);
    m(0, 0) = 1.0 - p;
    m(1, 1) = p;
    return {m, {2}};
}

// Heats predicted by the ansatz with the closed-form f4.
inline CycleThermo n2_ansatz_thermo(const ChainSpec& spec, const CycleConfig& config) {
    const double f4 = n2_f4(spec, config.tau1, config.second_evolution());
    const double g = g_function(spec.E[0], spec.E[1], config.beta1, config.beta2);
    CycleThermo t;
    t.Q_C_star = g * f4 * spec.E[1];
    t.Q_H_star = -g * f4 * spec.E[0];
    t.W_star = g * f4 * (spec.E[0] - spec.E[1]);
    t.W_quench = t.W_star;
    t.clausius_star = config.beta1 * t.Q_H_star + config.beta2 * t.Q_C_star;
    return t;
}

// ---- N = 3 two-stroke chain with exchange couplings only ----

struct N3Result {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double f2 = 0.0;
    double constraint_residual = 0.0;
};

inline N3Result n3_twostroke_f2(const ChainSpec& spec, double tau) {
    spec.validate();
    if (spec.N() != 3) throw DomainError("n3_twostroke_f2: need N = 3");
    for (int k = 0; k < 2; ++k)
        if (spec.K[k] != 0.0 || spec.F[k] != 0.0)
            throw DomainError("n3_twostroke_f2: only exchange couplings J are allowed");
    const Hamiltonian h = build_hamiltonian(spec);
    const Mat u = evolution_operator(diagonalize(h.matrix, sectors_by_popcount(3)), tau).dense();
    // One-excitation block labelled by the up site, two-excitation block by the down site.
    const IndexList up{4, 2, 1};
    const IndexList hole{3, 5, 6};
    const Mat u1 = u(up, up);
    const Mat u2 = u(hole, hole);
    auto mod2 = [](cplx z) { return std::norm(z); };
    N3Result r;
    r.a = mod2(u1(0, 1));
    r.b = mod2(u1(1, 2));
    r.c = mod2(u1(2, 0));
    const std::array<std::array<int, 2>, 3> pairs{{{0, 1}, {1, 2}, {2, 0}}};
    const std::array<double, 3> ref{r.a, r.b, r.c};
    for (int k = 0; k < 3; ++k) {
        const int i = pairs[k][0], j = pairs[k][1];
        for (double v : {mod2(u1(j, i)), mod2(u2(i, j)), mod2(u2(j, i))})
            r.constraint_residual = std::max(r.constraint_residual, std::abs(v - ref[k]));
    }
    if (r.constraint_residual > 1e-10)
        throw InconsistencyError("n3_twostroke_f2: equal-modulus constraint violated by " +
                                 std::to_string(r.constraint_residual));
    const double den = r.a + r.b;
    if (den < 1e-14) {
        if (r.c < 1e-14) return r;
        throw InconsistencyError("n3_twostroke_f2: a + b vanishes while c does not");
    }
    r.f2 = (r.a * r.b + r.b * r.c + r.c * r.a) / den;
    return r;
}

// ---- two-site model without magnetization symmetry ----

struct NoSymConstants {
    RabiPair J;
    RabiPair K;

    cplx C_J(double t) const { return J.C(t); }
    cplx S_J(double t) const { return J.S(t); }
    cplx C_K(double t) const { return K.C(t); }
    cplx S_K(double t) const { return K.S(t); }
    double omega_J() const { return J.omega; }
    double omega_K() const { return K.omega; }

    double S_of_tau(double t) const { return J.transfer(t) - K.transfer(t); }

    double f_H(double t1, double t2) const {
        const double x = std::norm(C_K(t1)) - std::norm(S_J(t1));
        return S_of_tau(t2) * x * x / (1.0 - S_of_tau(t1) * S_of_tau(t2)) - std::norm(S_K(t1)) +
               std::norm(S_J(t1));
    }

    double f_C(double t1, double t2) const {
        const double x1 = std::norm(C_K(t1)) - std::norm(S_J(t1));
        const double x2 = std::norm(C_K(t2)) - std::norm(S_J(t2));
        return x1 * x2 / (1.0 - S_of_tau(t1) * S_of_tau(t2)) - 1.0;
    }
};

inline NoSymConstants nosym_constants(const NoSymPairSpec& p) {
    p.validate();
    return {RabiPair(p.E2 - p.E1, p.J_R, p.J_I), RabiPair(p.E2 + p.E1, p.K_R, p.K_I)};
}

struct NoSymResult {
    NoSymConstants constants;
    double p_up_star = 0.0;       // <1|rho_B*|1>
    double p_down_star = 0.0;     // <0|rho_B*|0>
    CycleThermo thermo;           // from the closed-form populations
    double Q_C_fform = 0.0;       // (E2/2)[f_H(t1,t2) d1 + f_C(t1,t2) d2]
    double Q_H_fform = 0.0;       // (E1/2)[f_H(t2,t1) d2 + f_C(t2,t1) d1]
    double printed_Q_C = 0.0;
    double printed_Q_H = 0.0;
    double printed_W = 0.0;
    double printed_clausius = 0.0;
};

// (e^{-b E/2} - e^{b E/2}) / Z, twice the spin-z expectation of the Gibbs state.
inline double gibbs_polarization(double E, double beta) { return 2.0 * up_probability(E, beta) - 1.0; }

inline NoSymResult nosym_thermo(const NoSymPairSpec& spec, const CycleConfig& config) {
    config.validate();
    NoSymResult r;
    r.constants = nosym_constants(spec);
    const NoSymConstants& c = r.constants;
    const double t1 = config.tau1;
    const double t2 = config.second_evolution();
    const double S1 = c.S_of_tau(t1);
    const double S2 = c.S_of_tau(t2);
    const double den = 1.0 - S1 * S2;
    if (!(den > 1e-14)) throw DomainError("nosym_thermo: degenerate denominator 1 - S(t1) S(t2)");
    const double a = up_probability(spec.E1, config.beta1);
    const double b = up_probability(spec.E2, config.beta2);
    const double cj1 = std::norm(c.C_J(t1)), sk1 = std::norm(c.S_K(t1));
    const double cj2 = std::norm(c.C_J(t2)), sk2 = std::norm(c.S_K(t2));
    r.p_up_star = (S2 * (a * cj1 + (1.0 - a) * sk1) + b * cj2 + (1.0 - b) * sk2) / den;
    r.p_down_star = (S2 * ((1.0 - a) * cj1 + a * sk1) + (1.0 - b) * cj2 + b * sk2) / den;

    const double p = r.p_up_star;
    const double s1J = c.J.transfer(t1), s1K = c.K.transfer(t1);
    const double s2J = c.J.transfer(t2), s2K = c.K.transfer(t2);
    const double a1 = a + s1K * (1.0 - a - p) + s1J * (p - a);
    const double b1 = p + s1K * (1.0 - a - p) + s1J * (a - p);
    const double a2 = a1 + s2K * (1.0 - a1 - b) + s2J * (b - a1);
    r.thermo.Q_C_star = spec.E2 * (b1 - b);
    r.thermo.Q_H_star = spec.E1 * (a2 - a);
    r.thermo.W_star = -(r.thermo.Q_H_star + r.thermo.Q_C_star);
    r.thermo.W_quench = r.thermo.W_star;
    fill_regime(r.thermo, config.beta1, config.beta2, default_zero_tol(spec.E1, spec.E2));

    const double dd1 = gibbs_polarization(spec.E1, config.beta1);
    const double dd2 = gibbs_polarization(spec.E2, config.beta2);
    r.Q_C_fform = 0.5 * spec.E2 * (c.f_H(t1, t2) * dd1 + c.f_C(t1, t2) * dd2);
    r.Q_H_fform = 0.5 * spec.E1 * (c.f_H(t2, t1) * dd2 + c.f_C(t2, t1) * dd1);
    r.printed_Q_C = c.f_H(t1, t2) * dd1 + c.f_C(t1, t2) * dd2;
    r.printed_Q_H = c.f_H(t2, t1) * dd1 + c.f_C(t2, t1) * dd2;
    r.printed_W = -(c.f_H(t1, t2) + c.f_C(t2, t1)) * (dd1 + dd2);
    r.printed_clausius = (config.beta1 * c.f_C(t2, t1) + config.beta1 * c.f_H(t1, t2)) * dd1 +
                         (config.beta1 * c.f_H(t2, t1) + config.beta1 * c.f_C(t1, t2)) * dd2;
    return r;
}

enum class RatioBand { NonPositive, BelowCarnot, BelowOne, AboveOne };

inline const char* to_string(RatioBand b) {
    switch (b) {
        case RatioBand::NonPositive: return "ratio<=0";
        case RatioBand::BelowCarnot: return "0<ratio<b1/b2";
        case RatioBand::BelowOne: return "b1/b2<ratio<1";
        default: return "ratio>=1";
    }
}

inline std::set<Regime> allowed_nosym_regimes(RatioBand b) {
    switch (b) {
        case RatioBand::NonPositive: return {Regime::E, Regime::R, Regime::A, Regime::H};
        case RatioBand::BelowCarnot: return {Regime::R, Regime::H};
        case RatioBand::BelowOne: return {Regime::E, Regime::A, Regime::H};
        default: return {Regime::A, Regime::H};
    }
}

// Regimes permitted at E2/E1 = ratio; on a band edge both adjacent statements apply.
inline std::set<Regime> allowed_nosym_regimes(double ratio, double beta1, double beta2) {
    const double c = beta1 / beta2;
    const double eps = 1e-12;
    std::vector<RatioBand> bands;
    if (ratio <= eps) bands.push_back(RatioBand::NonPositive);
    if (ratio >= -eps && ratio <= c + eps) bands.push_back(RatioBand::BelowCarnot);
    if (ratio >= c - eps && ratio <= 1.0 + eps) bands.push_back(RatioBand::BelowOne);
    if (ratio >= 1.0 - eps) bands.push_back(RatioBand::AboveOne);
    std::set<Regime> out = allowed_nosym_regimes(bands.front());
    for (std::size_t k = 1; k < bands.size(); ++k) {
        std::set<Regime> next, other = allowed_nosym_regimes(bands[k]);
        for (Regime r : out)
            if (other.count(r)) next.insert(r);
        out = next;
    }
    return out;
}

inline RatioBand ratio_band(double ratio, double beta1, double beta2) {
    if (ratio <= 0.0) return RatioBand::NonPositive;
    if (ratio < beta1 / beta2) return RatioBand::BelowCarnot;
    if (ratio < 1.0) return RatioBand::BelowOne;
    return RatioBand::AboveOne;
}

struct RegimeScanRow {
    double E1 = 0.0;
    double ratio = 0.0;
    std::set<Regime> observed;
    std::set<Regime> allowed;
    bool contained = true;
};

struct RegimeScanReport {
    std::vector<RegimeScanRow> rows;
    bool all_contained = true;
    long evaluations = 0;
};

using NoSymEvaluator = std::function<CycleThermo(const NoSymPairSpec&, const CycleConfig&)>;

inline CycleThermo nosym_closed_form_evaluator(const NoSymPairSpec& s, const CycleConfig& c) {
    return nosym_thermo(s, c).thermo;
}

// For each E1 and ratio E2/E1, the set of non-degenerate regimes seen across
// the (tau1, tau2) grid, compared with the allowed set for that ratio.
inline RegimeScanReport nosym_regime_scan(const NoSymPairSpec& base, const std::vector<double>& E1_values,
                                          const std::vector<double>& ratios, const std::vector<double>& tau1_grid,
                                          const std::vector<double>& tau2_grid, double beta1, double beta2,
                                          const NoSymEvaluator& eval = nosym_closed_form_evaluator) {
    RegimeScanReport rep;
    for (double e1 : E1_values)
        for (double ratio : ratios) {
            RegimeScanRow row;
            row.E1 = e1;
            row.ratio = ratio;
            row.allowed = allowed_nosym_regimes(ratio, beta1, beta2);
            NoSymPairSpec s = base;
            s.E1 = e1;
            s.E2 = ratio * e1;
            for (double t1 : tau1_grid)
                for (double t2 : tau2_grid) {
                    CycleConfig cfg{beta1, beta2, t1, t2, StrokeMode::FourStroke};
                    const CycleThermo t = eval(s, cfg);
                    ++rep.evaluations;
                    if (t.regime != Regime::Degenerate) row.observed.insert(t.regime);
                }
            for (Regime r : row.observed)
                if (!row.allowed.count(r)) row.contained = false;
            rep.all_contained = rep.all_contained && row.contained;
            rep.rows.push_back(row);
        }
    return rep;
}

}  // namespace spinmachine
