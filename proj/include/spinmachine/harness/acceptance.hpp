#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "spinmachine/closedform.hpp"
#include "spinmachine/harness/recipes.hpp"
#include "spinmachine/harness/sweep.hpp"
#include "spinmachine/lowtemp.hpp"
#include "spinmachine/mixing.hpp"
#include "spinmachine/thermo.hpp"

namespace spinmachine::harness {

struct CriterionResult {
    std::string id;
    std::string title;
    bool pass = false;
    double measured = 0.0;
    double tolerance = 0.0;
    double seconds = 0.0;
    std::string detail;
};

// Collects the first- and second-law residuals of every converged limit cycle.
struct LawAudit {
    long runs = 0;
    double worst_first = 0.0;     // |Q_H + Q_C + W_quench| / scale
    double worst_clausius = 0.0;  // most negative beta1 Q_H + beta2 Q_C
    std::vector<std::string> violations;

    void record(const CycleThermo& t, double scale, const std::string& label) {
        ++runs;
        const double r = t.first_law_residual() / scale;
        worst_first = std::max(worst_first, r);
        worst_clausius = std::min(worst_clausius, t.clausius_star);
        if (r >= 1e-10 || t.clausius_star < -1e-10) violations.push_back(label);
    }
};

struct AcceptOptions {
    std::uint64_t seed = 0;
    int jobs = 1;
    std::filesystem::path out_dir = "accept_out";
    double tol = 1e-12;
    LawAudit* audit = nullptr;
};

using Rng = std::mt19937_64;

inline double uniform(Rng& r, double a, double b) { return std::uniform_real_distribution<double>(a, b)(r); }

inline ChainSpec random_chain(Rng& r, int n, double lo = -2.0, double hi = 2.0) {
    ChainSpec s;
    for (int k = 0; k < n; ++k) s.E.push_back(uniform(r, lo, hi));
    for (int k = 0; k + 1 < n; ++k) {
        s.J.push_back(uniform(r, lo, hi));
        s.K.push_back(uniform(r, lo, hi));
        s.F.push_back(uniform(r, lo, hi));
    }
    return s;
}

inline double spec_scale(const ChainSpec& s) {
    double m = 1.0;
    for (const auto* v : {&s.E, &s.J, &s.K, &s.F})
        for (double x : *v) m = std::max(m, std::abs(x));
    return m;
}

inline double spec_scale(const NoSymPairSpec& s) {
    double m = 1.0;
    for (double x : {s.E1, s.E2, s.J_R, s.J_I, s.K_R, s.K_I, s.F}) m = std::max(m, std::abs(x));
    return m;
}

inline nlohmann::json to_json(const ChainSpec& s) { return {{"E", s.E}, {"J", s.J}, {"K", s.K}, {"F", s.F}}; }

inline nlohmann::json to_json(const CycleConfig& c) {
    return {{"beta1", c.beta1}, {"beta2", c.beta2}, {"tau1", c.tau1}, {"tau2", c.tau2}, {"mode", to_string(c.mode)}};
}

inline std::string fmt(double v) { return format_double(v); }

inline CycleThermo audited_thermo(const FluidPtr& f, const CycleConfig& c, double scale, const AcceptOptions& o,
                                  const std::string& label) {
    LimitCycleOptions lo;
    lo.tol = o.tol;
    const CycleThermo t = run_cycle_thermo(f, c, lo);
    if (o.audit) o.audit->record(t, scale, label);
    return t;
}

// ---- 1: two-site oracle ----
inline CriterionResult criterion_n2_oracle(const AcceptOptions& o) {
    CriterionResult res{"c1", "two-site closed form vs numerical limit cycle", false, 0.0, 1e-8};
    Rng rng(o.seed + 1);
    const double floor = 1e-9;
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const ChainSpec s = random_chain(rng, 2);
        CycleConfig c{uniform(rng, 0.1, 5.0), uniform(rng, 0.1, 5.0), uniform(rng, 0.0, 10.0), uniform(rng, 0.0, 10.0),
                      StrokeMode::FourStroke};
        const CycleThermo num = audited_thermo(make_fluid(s), c, spec_scale(s), o, "c1#" + std::to_string(k));
        const CycleThermo ana = n2_ansatz_thermo(s, c);
        for (auto [x, y] : {std::pair{num.Q_H_star, ana.Q_H_star}, std::pair{num.Q_C_star, ana.Q_C_star},
                            std::pair{num.W_quench, ana.W_star}})
            worst = std::max(worst, std::abs(x - y) / std::max(std::abs(y), floor));
    }
    res.measured = worst;
    res.pass = worst < res.tolerance;
    res.detail = "100 sets, relative error with floor " + fmt(floor);
    return res;
}

// ---- 2: three-site two-stroke oracle ----
inline CriterionResult criterion_n3_oracle(const AcceptOptions& o) {
    CriterionResult res{"c2", "three-site two-stroke f2 vs closed form", false, 0.0, 1e-8};
    Rng rng(o.seed + 2);
    double worst = 0.0;
    int resampled = 0;
    for (int k = 0; k < 100;) {
        ChainSpec s = ChainSpec::uniform(3, 0.0, 0.0);
        for (double& e : s.E) e = uniform(rng, -2.0, 2.0);
        for (double& j : s.J) j = uniform(rng, -2.0, 2.0);
        CycleConfig c{uniform(rng, 0.1, 5.0), uniform(rng, 0.1, 5.0), uniform(rng, 0.0, 10.0), 0.0,
                      StrokeMode::TwoStroke};
        const double g = g_function(s.E[0], s.E[2], c.beta1, c.beta2);
        if (std::abs(g * s.E[2]) < 1e-3 || std::abs(g * s.E[0]) < 1e-3) {
            ++resampled;
            continue;
        }
        const CycleThermo t = audited_thermo(make_fluid(s), c, spec_scale(s), o, "c2#" + std::to_string(k));
        const AnsatzDecomposition a = extract_ansatz(t, s.E[0], s.E[2], c.beta1, c.beta2);
        const double f2 = n3_twostroke_f2(s, c.tau1).f2;
        worst = std::max({worst, std::abs(a.f4_value - f2), std::abs(a.f4_from_hot - f2)});
        ++k;
    }
    res.measured = worst;
    res.pass = worst < res.tolerance;
    res.detail = "100 specs, " + std::to_string(resampled) + " draws resampled for |g E| < 1e-3";
    return res;
}

inline ChainSpec random_chain_with_fields(Rng& rng, int n) {
    while (true) {
        ChainSpec s = random_chain(rng, n);
        if (std::abs(s.E.front()) > 0.05 && std::abs(s.E.back()) > 0.05) return s;
    }
}

// ---- 3: heat symmetry ----
inline CriterionResult criterion_heat_symmetry(const AcceptOptions& o) {
    CriterionResult res{"c3", "heat symmetry Q_H/E1 + Q_C/EN = 0", false, 0.0, 1e-9};
    Rng rng(o.seed + 3);
    double worst = 0.0;
    int count = 0;
    for (int n = 2; n <= 6; ++n)
        for (int k = 0; k < 20; ++k, ++count) {
            const ChainSpec s = random_chain_with_fields(rng, n);
            CycleConfig c{uniform(rng, 0.1, 5.0), uniform(rng, 0.1, 5.0), uniform(rng, 0.0, 10.0),
                          uniform(rng, 0.0, 10.0), StrokeMode::FourStroke};
            const CycleThermo t =
                audited_thermo(make_fluid(s), c, spec_scale(s), o, "c3#" + std::to_string(count));
            worst = std::max(worst, heat_symmetry_residual(t, s.E.front(), s.E.back()) / spec_scale(s));
        }
    res.measured = worst;
    res.pass = worst < res.tolerance;
    res.detail = std::to_string(count) + " chains, N = 2..6, residual divided by the largest parameter";
    return res;
}

// ---- 4: zero heat at beta1 E1 = beta2 EN ----
inline CriterionResult criterion_zero_heat(const AcceptOptions& o) {
    CriterionResult res{"c4", "zero heat when beta1 E1 = beta2 EN", false, 0.0, 1e-9};
    Rng rng(o.seed + 4);
    double worst = 0.0;
    int count = 0;
    for (int n = 2; n <= 6; ++n)
        for (int k = 0; k < 20;) {
            ChainSpec s = random_chain_with_fields(rng, n);
            if ((s.E.front() > 0) != (s.E.back() > 0)) s.E.back() = -s.E.back();
            const double b1 = uniform(rng, 0.1, 5.0);
            const double b2 = b1 * s.E.front() / s.E.back();
            if (b2 < 0.01 || b2 > 50.0) continue;
            CycleConfig c{b1, b2, uniform(rng, 0.0, 10.0), uniform(rng, 0.0, 10.0), StrokeMode::FourStroke};
            const CycleThermo t =
                audited_thermo(make_fluid(s), c, spec_scale(s), o, "c4#" + std::to_string(count));
            worst = std::max({worst, std::abs(t.Q_H_star) / std::abs(s.E.front()),
                              std::abs(t.Q_C_star) / std::abs(s.E.front())});
            ++k;
            ++count;
        }
    res.measured = worst;
    res.pass = worst < res.tolerance;
    res.detail = std::to_string(count) + " chains, max(|Q_H|, |Q_C|) / |E1|";
    return res;
}

inline std::array<int, 3> regime_signs(Regime r) {
    switch (r) {
        case Regime::E: return {-1, 1, 1};
        case Regime::R: return {1, -1, -1};
        case Regime::A: return {-1, 1, -1};
        case Regime::H: return {1, 1, -1};
        default: return {0, 0, 0};
    }
}

// ---- 5: fig. 2 regime map ----
inline CriterionResult criterion_fig2(const AcceptOptions& o) {
    CriterionResult res{"c5", "N=8 regime map over EN/E1 in [-1, 2]", false, 0.0, 0.05};
    const SweepConfig cfg = recipe("fig2");
    const SweepResult sr = run_sweep(cfg, o.jobs);
    const auto& cols = sr.table.columns;
    auto col = [&](const std::string& n) {
        return static_cast<std::size_t>(std::find(cols.begin(), cols.end(), n) - cols.begin());
    };
    const std::size_t ir = col("ratio"), iqh = col("Q_H"), iqc = col("Q_C"), iw = col("W_quench"), ireg = col("regime"),
                      ist = col("status");
    std::vector<double> ratio, qh, qc, w;
    std::vector<Regime> reg;
    std::vector<std::string> problems;
    for (const auto& row : sr.table.rows) {
        if (std::get<std::string>(row[ist]) != "ok") {
            problems.push_back("status at ratio " + fmt(std::get<double>(row[ir])));
            continue;
        }
        ratio.push_back(std::get<double>(row[ir]));
        qh.push_back(std::get<double>(row[iqh]));
        qc.push_back(std::get<double>(row[iqc]));
        w.push_back(std::get<double>(row[iw]));
        const std::string r = std::get<std::string>(row[ireg]);
        reg.push_back(r == "E" ? Regime::E : r == "R" ? Regime::R : r == "A" ? Regime::A : r == "H" ? Regime::H
                                                                                                      : Regime::Degenerate);
        if (o.audit) {
            CycleThermo t;
            t.Q_H_star = qh.back();
            t.Q_C_star = qc.back();
            t.W_quench = w.back();
            t.clausius_star = std::get<double>(row[col("clausius")]);
            o.audit->record(t, 1.0, "c5@" + fmt(ratio.back()));
        }
    }
    const double step = 0.05;
    const double b = cfg.cycle.beta1 / cfg.cycle.beta2;
    const std::vector<double> edges{0.0, b, 1.0};
    auto near_edge = [&](double r) {
        for (double e : edges)
            if (std::abs(r - e) <= step + 1e-12) return true;
        return false;
    };
    int mismatches = 0;
    for (std::size_t k = 0; k < reg.size(); ++k) {
        const Regime pred = predicted_regime(1.0, ratio[k], cfg.cycle.beta1, cfg.cycle.beta2);
        if (reg[k] != pred && !near_edge(ratio[k])) {
            ++mismatches;
            problems.push_back("regime " + std::string(to_string(reg[k])) + " at ratio " + fmt(ratio[k]));
        }
        if (reg[k] != Regime::Degenerate) {
            const auto s = regime_signs(reg[k]);
            const std::array<double, 3> v{qh[k], qc[k], w[k]};
            for (int i = 0; i < 3; ++i)
                if ((v[i] > 0 ? 1 : -1) != s[i]) problems.push_back("sign at ratio " + fmt(ratio[k]));
        }
    }
    double worst_edge = 0.0;
    for (std::size_t k = 1; k < reg.size(); ++k) {
        if (reg[k] == reg[k - 1]) continue;
        const double mid = 0.5 * (ratio[k] + ratio[k - 1]);
        double d = 1e300;
        for (double e : edges) d = std::min(d, std::abs(mid - e));
        worst_edge = std::max(worst_edge, d);
    }
    double jump_ratio = 0.0;
    for (const auto* v : {&qh, &qc, &w}) {
        const auto [mn, mx] = std::minmax_element(v->begin(), v->end());
        const double range = *mx - *mn;
        double jump = 0.0;
        for (std::size_t k = 1; k < v->size(); ++k) jump = std::max(jump, std::abs((*v)[k] - (*v)[k - 1]));
        if (range > 0.0) jump_ratio = std::max(jump_ratio, jump / range);
    }
    if (jump_ratio > 0.25) problems.push_back("curve jump " + fmt(jump_ratio) + " of its range");
    res.measured = worst_edge;
    res.pass = problems.empty() && mismatches == 0 && worst_edge <= step + 1e-12 && reg.size() == 61;
    std::ostringstream d;
    d << reg.size() << " points, transitions within " << fmt(worst_edge) << " of {0, " << fmt(b)
      << ", 1}, largest step " << fmt(jump_ratio) << " of range";
    for (std::size_t k = 0; k < std::min<std::size_t>(problems.size(), 5); ++k) d << "; " << problems[k];
    res.detail = d.str();
    return res;
}

// ---- 6: temperature independence of f4 ----
inline CriterionResult criterion_ansatz_independence(const AcceptOptions& o) {
    CriterionResult res{"c6", "f4 independent of (beta1, beta2)", false, 0.0, 1e-6};
    auto run_family = [&](bool with_ising, std::uint64_t seed, nlohmann::json& counter, double& worst,
                          double& range_violation) {
        Rng rng(seed);
        int failing = 0;
        for (int k = 0; k < 20; ++k) {
            const int n = 2 + k % 5;
            ChainSpec s = random_chain_with_fields(rng, n);
            if (!with_ising) std::fill(s.F.begin(), s.F.end(), 0.0);
            const double t1 = uniform(rng, 0.0, 10.0), t2 = uniform(rng, 0.0, 10.0);
            const FluidPtr f = make_fluid(s);
            std::vector<double> f4s;
            std::vector<std::pair<double, double>> betas;
            while (f4s.size() < 5) {
                const double b1 = uniform(rng, 0.1, 5.0), b2 = uniform(rng, 0.1, 5.0);
                const double g = g_function(s.E.front(), s.E.back(), b1, b2);
                if (std::abs(g * s.E.back()) < 1e-3) continue;
                CycleConfig c{b1, b2, t1, t2, StrokeMode::FourStroke};
                const CycleThermo t = audited_thermo(f, c, spec_scale(s), o,
                                                     std::string("c6") + (with_ising ? "" : "F0") + "#" +
                                                         std::to_string(k));
                f4s.push_back(extract_ansatz(t, s.E.front(), s.E.back(), b1, b2).f4_value);
                betas.emplace_back(b1, b2);
            }
            double spread = 0.0;
            for (double a : f4s) {
                for (double b : f4s) spread = std::max(spread, std::abs(a - b) / std::max(std::abs(a), 1e-12));
                range_violation = std::max({range_violation, -a, a - 1.0 - 1e-8});
            }
            worst = std::max(worst, spread);
            const bool bad = spread >= 1e-6 || *std::min_element(f4s.begin(), f4s.end()) < 0.0 ||
                             *std::max_element(f4s.begin(), f4s.end()) > 1.0 + 1e-8;
            if (bad) {
                ++failing;
                nlohmann::json e;
                e["spec"] = to_json(s);
                e["tau1"] = t1;
                e["tau2"] = t2;
                e["betas"] = betas;
                e["f4"] = f4s;
                e["relative_spread"] = spread;
                counter.push_back(e);
            }
        }
        return failing;
    };
    nlohmann::json counter = nlohmann::json::array(), counter_f0 = nlohmann::json::array();
    double worst = 0.0, range_violation = -1.0, worst_f0 = 0.0, range_f0 = -1.0;
    const int failing = run_family(true, o.seed + 6, counter, worst, range_violation);
    const int failing_f0 = run_family(false, o.seed + 60, counter_f0, worst_f0, range_f0);
    res.measured = worst;
    res.pass = failing == 0;
    std::ostringstream d;
    d << failing << "/20 chains violate; without Ising terms " << failing_f0 << "/20 violate (spread "
      << fmt(worst_f0) << ")";
    if (failing > 0) {
        const auto path = o.out_dir / "c6_counterexamples.json";
        nlohmann::json doc;
        doc["criterion"] = "f4 temperature independence";
        doc["counterexamples"] = counter;
        doc["without_ising_counterexamples"] = counter_f0;
        write_text(path, doc.dump(2) + "\n");
        d << "; counterexamples written to " << path.string();
    }
    res.detail = d.str();
    return res;
}

// ---- 8: low-temperature expansion ----
inline CriterionResult criterion_lowtemp_scaling(const AcceptOptions& o) {
    CriterionResult res{"c8", "low-temperature deviation shrinks linearly in x", false, 0.0, 0.9};
    Rng rng(o.seed + 8);
    const std::vector<double> xs{1e-3, 5e-4, 2.5e-4};
    double worst_slope = 1e300;
    std::ostringstream d;
    for (int k = 0; k < 5;) {
        ChainSpec s = random_chain(rng, 5, -1.0, 1.0);
        for (double& e : s.E) e = uniform(rng, 0.5, 2.0);
        const double tau = uniform(rng, 0.5, 3.0);
        const double f2 = f2_lowtemp(s, tau).f2;
        if (f2 < 1e-3) continue;
        const FluidPtr f = make_fluid(s);
        std::vector<double> lx, ld;
        for (double x : xs) {
            const LowTempParams p{x, 0.5 * x};
            const double b1 = -std::log(p.x1) / s.E.front();
            const double b2 = -std::log(p.x2) / s.E.back();
            CycleConfig c{b1, b2, tau, 0.0, StrokeMode::TwoStroke};
            const CycleThermo num = audited_thermo(f, c, spec_scale(s), o, "c8#" + std::to_string(k));
            const CycleThermo lt = lowtemp_thermo(f2, s.E.front(), s.E.back(), p, b1, b2);
            const double dev = std::max({std::abs(num.Q_H_star - lt.Q_H_star), std::abs(num.Q_C_star - lt.Q_C_star),
                                         std::abs(num.W_quench - lt.W_star)});
            const double size = std::max({std::abs(lt.Q_H_star), std::abs(lt.Q_C_star), std::abs(lt.W_star)});
            lx.push_back(std::log(x));
            ld.push_back(std::log(dev / size));
        }
        const double mx = (lx[0] + lx[1] + lx[2]) / 3.0, my = (ld[0] + ld[1] + ld[2]) / 3.0;
        double sxy = 0.0, sxx = 0.0;
        for (int i = 0; i < 3; ++i) {
            sxy += (lx[i] - mx) * (ld[i] - my);
            sxx += (lx[i] - mx) * (lx[i] - mx);
        }
        const double slope = sxy / sxx;
        worst_slope = std::min(worst_slope, slope);
        d << (k ? ", " : "relative-deviation exponents: ") << fmt(std::round(slope * 1e4) / 1e4);
        ++k;
    }
    res.measured = worst_slope;
    res.pass = worst_slope >= res.tolerance;
    res.detail = d.str();
    return res;
}

// ---- 9: fig. 3 long chain ----
inline CriterionResult criterion_fig3(const AcceptOptions& o) {
    CriterionResult res{"c9", "N=1000 low-temperature f2(tau) curve", false, 0.0, 1e-10};
    const SweepConfig cfg = recipe("fig3");
    const LowTempSweeper sw(cfg.chain);
    const auto taus = cfg.axes.at(0).values;
    std::vector<F2Result> out(taus.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t k = next++; k < taus.size(); k = next++) out[k] = sw.evaluate(taus[k], cfg.lowtemp_budget);
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < o.jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    double worst_cons = 0.0, widest = 0.0;
    bool in_range = true;
    int unconverged = 0;
    for (const auto& r : out) {
        worst_cons = std::max(worst_cons, r.conservation_residual);
        in_range = in_range && r.f2_lower >= 0.0 && r.f2_upper <= 1.0 && r.f2 >= 0.0 && r.f2 <= 1.0;
        widest = std::max(widest, r.f2_upper - r.f2_lower);
        unconverged += r.converged ? 0 : 1;
    }
    const bool starts_at_zero = std::abs(out.front().f2) < 1e-12 && out.front().f2_upper < 1e-12;
    res.measured = worst_cons;
    res.pass = starts_at_zero && in_range && worst_cons < res.tolerance && taus.size() == 200;
    std::ostringstream d;
    d << taus.size() << " points, f2(0) = " << fmt(out.front().f2) << ", conservation residual " << fmt(worst_cons)
      << ", " << unconverged << " points bounded within budget " << cfg.lowtemp_budget << " (widest interval "
      << fmt(widest) << ")";
    res.detail = d.str();
    return res;
}

inline NoSymPairSpec random_nosym(Rng& rng) {
    NoSymPairSpec s;
    s.E1 = uniform(rng, -2.0, 2.0);
    s.E2 = uniform(rng, -2.0, 2.0);
    s.J_R = uniform(rng, -1.0, 1.0);
    s.J_I = uniform(rng, -1.0, 1.0);
    s.K_R = uniform(rng, -1.0, 1.0);
    s.K_I = uniform(rng, -1.0, 1.0);
    s.F = uniform(rng, -1.0, 1.0);
    return s;
}

// ---- 10: model without magnetization symmetry ----
inline CriterionResult criterion_nosym(const AcceptOptions& o) {
    CriterionResult res{"c10", "no-symmetry pair: closed form and regime bands", false, 0.0, 1e-8};
    Rng rng(o.seed + 10);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const NoSymPairSpec s = random_nosym(rng);
        CycleConfig c{uniform(rng, 0.1, 5.0), uniform(rng, 0.1, 5.0), uniform(rng, 0.0, 10.0), uniform(rng, 0.0, 10.0),
                      StrokeMode::FourStroke};
        const FluidPtr f = make_fluid(s);
        const LimitCycle lc = assemble_limit_cycle(f, c);
        const NoSymResult cf = nosym_thermo(s, c);
        worst = std::max(worst, std::abs(lc.rho_CB_star.matrix(1, 1).real() - cf.p_up_star));
        worst = std::max(worst, std::abs(lc.rho_CB_star.matrix(0, 0).real() - cf.p_down_star));
        CycleThermo t;
        try {
            t = limit_cycle_thermo(lc, *f);
        } catch (const InconsistencyError&) {
            worst = 1e300;
            continue;
        }
        if (o.audit) o.audit->record(t, spec_scale(s), "c10#" + std::to_string(k));
        worst = std::max({worst, std::abs(t.Q_H_star - cf.thermo.Q_H_star), std::abs(t.Q_C_star - cf.thermo.Q_C_star)});
    }
    const NoSymPairSpec base{1.0, 1.0, 1.5 / kCouplingScale, 0.0, 0.3 / kCouplingScale, 0.0, 0.0};
    const double b1 = 0.3, b2 = 0.6;
    NoSymEvaluator numeric = [&](const NoSymPairSpec& s, const CycleConfig& c) {
        LimitCycleOptions lo;
        lo.verify_dual = false;
        const CycleThermo t = run_cycle_thermo(make_fluid(s), c, lo);
        if (o.audit) o.audit->record(t, spec_scale(s), "c10 scan");
        return t;
    };
    std::vector<double> ratios;
    for (int k = 0; k <= 120; ++k) ratios.push_back(snap(-1.0 + 0.025 * k));
    long evals = 0;
    bool contained = true;
    std::vector<std::string> bad;
    for (auto [t1, t2] : {std::pair{1.0, 1.0}, std::pair{2.0, 2.0}, std::pair{3.0, 0.0}}) {
        const auto rep = nosym_regime_scan(base, {1.0}, ratios, {t1}, {t2}, b1, b2, numeric);
        evals += rep.evaluations;
        contained = contained && rep.all_contained;
        for (const auto& r : rep.rows)
            if (!r.contained) bad.push_back("ratio " + fmt(r.ratio) + " observed " + join_regimes(r.observed));
    }
    std::vector<double> grid;
    for (int k = 0; k <= 24; ++k) grid.push_back(0.25 * k);
    for (auto [e1, e2] : {std::pair{-2.0, 1.5}, std::pair{1.0, 0.25}, std::pair{1.0, 0.75}, std::pair{1.0, 1.5}}) {
        const auto rep = nosym_regime_scan(base, {e1}, {e2 / e1}, grid, grid, b1, b2, numeric);
        evals += rep.evaluations;
        contained = contained && rep.all_contained;
        for (const auto& r : rep.rows)
            if (!r.contained)
                bad.push_back("E1 " + fmt(e1) + " ratio " + fmt(r.ratio) + " observed " + join_regimes(r.observed));
    }
    res.measured = worst;
    res.pass = worst < res.tolerance && contained;
    std::ostringstream d;
    d << "100 random pairs; " << evals << " scan evaluations, bands " << (contained ? "respected" : "violated");
    for (std::size_t k = 0; k < std::min<std::size_t>(bad.size(), 5); ++k) d << "; " << bad[k];
    res.detail = d.str();
    return res;
}

// ---- 11: mixing diagnostics ----
inline CriterionResult criterion_mixing(const AcceptOptions& o) {
    CriterionResult res{"c11", "mixing diagnostics on connected and disconnected chains", false, 0.0, 1e-12};
    const CycleConfig cfg{1.0, 1.0, 1.1, 0.7, StrokeMode::FourStroke};
    std::vector<ChainSpec> connected;
    {
        ChainSpec a = ChainSpec::uniform(3, 1.0, 1.0);
        a.E = {1.0, 0.7, 1.3};
        connected.push_back(a);
        ChainSpec b = ChainSpec::uniform(4, 1.0, 0.0, 0.8);
        b.E = {1.0, 1.2, 0.9, 1.4};
        b.J[1] = 0.6;
        connected.push_back(b);
        Rng rng(o.seed + 11);
        ChainSpec c = random_chain(rng, 5, 0.3, 1.2);
        connected.push_back(c);
    }
    ChainSpec cut = ChainSpec::uniform(5, 1.0, 1.0);
    cut.E = {1.0, 0.8, 1.2, 0.9, 1.1};
    cut.J[0] = cut.J[3] = 0.0;
    std::vector<std::string> problems;
    double worst_mono = 0.0;
    auto all_up = [](int sites) {
        const int d = 1 << sites;
        Mat m = Mat::Zero(d, d);
        m(d - 1, d - 1) = 1.0;
        return DensityMatrix{m, site_range(1, sites)};
    };
    double min_gap = 1e300;
    for (std::size_t k = 0; k < connected.size(); ++k) {
        const FluidPtr f = make_fluid(connected[k]);
        const std::string tag = "connected#" + std::to_string(k);
        if (factorized_eigenvector_test(*f).found) problems.push_back(tag + " has a factorized eigenvector");
        const double gap = spectral_gap(zero_temperature_channel(f, cfg));
        min_gap = std::min(min_gap, gap);
        if (!(gap > 1e-8)) problems.push_back(tag + " gap " + fmt(gap));
        for (int n = 1; n <= f->N() - 2; ++n) {
            double prev = 1.0;
            for (int m : {10, 50, 200}) {
                const double q = contraction_norm(*f, cfg, n, m);
                if (!(q < prev)) problems.push_back(tag + " Q_" + std::to_string(n) + " not decreasing");
                prev = q;
            }
            if (!(prev < 1e-6)) problems.push_back(tag + " Q_" + std::to_string(n) + "(200) = " + fmt(prev));
        }
        const SurvivalProfile sp = survival_profile(f, cfg, all_up(f->N() - 1), 200);
        worst_mono = std::max({worst_mono, sp.monotone_n_violation, sp.monotone_m_violation});
        for (int n = 1; n < sp.P.rows(); ++n)
            if (!(sp.P(n, 200) < 1e-6)) problems.push_back(tag + " survival P_" + std::to_string(n) + " persists");
    }
    {
        const FluidPtr f = make_fluid(cut);
        const FactorizedReport rep = factorized_eigenvector_test(*f);
        if (!rep.found) problems.push_back("disconnected chain: no factorized witness");
        const double gap = spectral_gap(zero_temperature_channel(f, cfg));
        if (!(gap < 1e-10)) problems.push_back("disconnected chain gap " + fmt(gap));
        if (!(contraction_norm(*f, cfg, 1, 200) > 0.99)) problems.push_back("disconnected chain Q_1 decays");
        const SurvivalProfile sp = survival_profile(f, cfg, all_up(cut.N() - 1), 200);
        worst_mono = std::max({worst_mono, sp.monotone_n_violation, sp.monotone_m_violation});
        if (!(sp.P(1, 200) > 0.5)) problems.push_back("disconnected chain survival does not plateau");
    }
    res.measured = worst_mono;
    res.pass = problems.empty() && worst_mono <= res.tolerance;
    std::ostringstream d;
    d << connected.size() << " connected chains (smallest zero-temperature gap " << fmt(min_gap)
      << "), one disconnected chain";
    for (std::size_t k = 0; k < std::min<std::size_t>(problems.size(), 5); ++k) d << "; " << problems[k];
    res.detail = d.str();
    return res;
}

// ---- 7: first and second law over every run above ----
inline CriterionResult criterion_laws(const AcceptOptions& o);

struct CriterionEntry {
    std::string id;
    std::function<CriterionResult(const AcceptOptions&)> run;
};

inline std::vector<CriterionEntry> criteria() {
    return {{"c1", criterion_n2_oracle},          {"c2", criterion_n3_oracle},
            {"c3", criterion_heat_symmetry},      {"c4", criterion_zero_heat},
            {"c5", criterion_fig2},               {"c6", criterion_ansatz_independence},
            {"c7", criterion_laws},               {"c8", criterion_lowtemp_scaling},
            {"c9", criterion_fig3},               {"c10", criterion_nosym},
            {"c11", criterion_mixing}};
}

inline CriterionResult criterion_laws(const AcceptOptions& o) {
    CriterionResult res{"c7", "first and second law on every converged run", false, 0.0, 1e-10};
    LawAudit audit;
    AcceptOptions inner = o;
    inner.audit = &audit;
    inner.out_dir = o.out_dir / "c7";
    for (const auto& c : criteria())
        if (c.id != "c7" && c.id != "c9" && c.id != "c11") c.run(inner);
    res.measured = audit.worst_first;
    res.pass = audit.violations.empty();
    std::ostringstream d;
    d << audit.runs << " runs, worst first-law residual " << fmt(audit.worst_first) << ", most negative Clausius sum "
      << fmt(audit.worst_clausius);
    for (std::size_t k = 0; k < std::min<std::size_t>(audit.violations.size(), 5); ++k)
        d << "; violation " << audit.violations[k];
    res.detail = d.str();
    return res;
}

inline const std::map<std::string, std::vector<std::string>>& suites() {
    static const std::map<std::string, std::vector<std::string>> s{
        {"all", {"c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8", "c9", "c10", "c11"}},
        {"oracle", {"c1", "c2", "c10"}},
        {"symmetry", {"c3", "c4"}},
        {"figures", {"c5", "c9"}},
        {"conjecture", {"c6"}},
        {"laws", {"c7"}},
        {"lowtemp", {"c8", "c9"}},
        {"mixing", {"c11"}}};
    return s;
}

// Expands a suite name or a single criterion id.
inline std::vector<std::string> select_criteria(const std::string& selector) {
    const std::string key = selector.empty() ? "all" : selector;
    if (auto it = suites().find(key); it != suites().end()) return it->second;
    for (const auto& c : criteria())
        if (c.id == key) return {key};
    throw ConfigError("unknown acceptance suite '" + key + "'");
}

inline CriterionResult run_criterion(const std::string& id, const AcceptOptions& o) {
    for (const auto& c : criteria())
        if (c.id == id) {
            const auto t0 = std::chrono::steady_clock::now();
            CriterionResult r;
            try {
                r = c.run(o);
            } catch (const std::exception& e) {
                r.id = id;
                r.title = "aborted";
                r.pass = false;
                r.detail = std::string("exception: ") + e.what();
            }
            r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            return r;
        }
    throw ConfigError("unknown criterion '" + id + "'");
}

// Runtime limits per criterion in seconds.
inline double runtime_limit(const std::string& id) {
    static const std::map<std::string, double> lim{{"c1", 10.0}, {"c2", 30.0}, {"c3", 120.0}, {"c5", 600.0},
                                                   {"c9", 120.0}};
    auto it = lim.find(id);
    return it == lim.end() ? 0.0 : it->second;
}

inline std::string result_line(const CriterionResult& r) {
    std::ostringstream os;
    os << r.id << " " << (r.pass ? "PASS" : "FAIL") << " " << r.title << " | measured " << fmt(r.measured)
       << " tol " << fmt(r.tolerance) << " | " << std::fixed << std::setprecision(2) << r.seconds << " s | "
       << r.detail;
    return os.str();
}

inline nlohmann::json result_json(const CriterionResult& r) {
    return {{"id", r.id},           {"title", r.title},   {"pass", r.pass},      {"measured", r.measured},
            {"tolerance", r.tolerance}, {"seconds", r.seconds}, {"detail", r.detail}};
}

// Applies the runtime limit after the fact so that the timing is part of the verdict.
inline void enforce_runtime(CriterionResult& r) {
    const double lim = runtime_limit(r.id);
    if (lim > 0.0 && r.seconds > lim) {
        r.pass = false;
        r.detail += "; runtime limit " + fmt(lim) + " s exceeded";
    }
}

}  // namespace spinmachine::harness
