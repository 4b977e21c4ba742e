#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "spinmachine/closedform.hpp"
#include "spinmachine/harness/config.hpp"
#include "spinmachine/harness/table.hpp"
#include "spinmachine/lowtemp.hpp"
#include "spinmachine/mixing.hpp"
#include "spinmachine/thermo.hpp"

namespace spinmachine::harness {

struct GridPoint {
    std::size_t panel = 0;
    std::vector<double> values;   // one per axis
};

inline std::vector<GridPoint> expand_grid(const SweepConfig& c) {
    std::vector<GridPoint> out;
    for (std::size_t p = 0; p < c.panels.size(); ++p) {
        std::vector<std::size_t> idx(c.axes.size(), 0);
        while (true) {
            GridPoint g;
            g.panel = p;
            for (std::size_t a = 0; a < c.axes.size(); ++a) g.values.push_back(c.axes[a].values[idx[a]]);
            out.push_back(std::move(g));
            // Last axis varies fastest, so the first axis is the outermost loop.
            int a = static_cast<int>(c.axes.size()) - 1;
            while (a >= 0 && ++idx[a] == c.axes[a].values.size()) idx[a--] = 0;
            if (a < 0) break;
        }
    }
    return out;
}

inline std::vector<std::string> sweep_columns(const SweepConfig& c) {
    std::vector<std::string> cols{"panel", "index", "ratio", "E1", "EN", "tau1", "tau2", "beta1", "beta2"};
    auto add = [&](std::initializer_list<const char*> xs) {
        for (const char* x : xs) cols.emplace_back(x);
    };
    if (c.wants("thermo") || c.wants("regime") || c.wants("ansatz"))
        add({"Q_H", "Q_C", "W", "W_quench", "clausius", "first_law_residual", "fixed_point_residual", "loop_residual"});
    if (c.wants("regime")) add({"regime", "predicted_regime"});
    if (c.wants("ansatz")) add({"g", "f4", "f4_hot"});
    if (c.wants("lowtemp"))
        add({"f2", "f2_lower", "f2_upper", "tail_bound", "series_cycles", "conservation_residual", "lt_Q_H", "lt_Q_C",
             "lt_W"});
    if (c.wants("mixing")) add({"gap", "gap_zero_temperature"});
    if (c.wants("nosym_closed"))
        add({"Q_H_closed", "Q_C_closed", "W_closed", "p_up_closed", "regime_closed", "closed_deviation"});
    cols.emplace_back("status");
    return cols;
}

inline bool needs_dense(const SweepConfig& c) {
    return c.wants("thermo") || c.wants("regime") || c.wants("ansatz") || c.wants("mixing");
}

inline bool chain_shape_varies(const SweepConfig& c) {
    for (const auto& a : c.axes)
        if (is_chain_shape_field(a.field)) return true;
    for (const auto& p : c.panels)
        for (const auto& s : p.set)
            if (is_chain_shape_field(s.field)) return true;
    return false;
}

inline std::string join_regimes(const std::set<Regime>& rs) {
    std::string s;
    for (Regime r : rs) s += (s.empty() ? "" : "|") + std::string(to_string(r));
    return s;
}

struct SweepResult {
    Table table;
    long flagged = 0;
};

class SweepRunner {
public:
    explicit SweepRunner(SweepConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.kind == FluidKind::Chain && needs_dense(cfg_) && cfg_.chain.N() > kDenseSiteCap)
            throw ConfigError("config: dense analyses are limited to N <= " + std::to_string(kDenseSiteCap) +
                              "; use only the lowtemp analysis for long chains");
        if (cfg_.wants("lowtemp") && !chain_shape_varies(cfg_))
            shared_lowtemp_ = std::make_shared<const LowTempSweeper>(cfg_.chain);
        columns_ = sweep_columns(cfg_);
    }

    SweepResult run(int jobs = 1) const {
        const auto grid = expand_grid(cfg_);
        std::vector<std::vector<Cell>> rows(grid.size());
        std::vector<char> flags(grid.size(), 0);
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (std::size_t k = next++; k < grid.size(); k = next++) {
                bool flagged = false;
                rows[k] = evaluate(grid[k], static_cast<long>(k), flagged);
                flags[k] = flagged ? 1 : 0;
            }
        };
        const int n = std::max(1, std::min<int>(jobs, static_cast<int>(grid.size())));
        if (n == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int t = 0; t < n; ++t) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
        }
        SweepResult r;
        r.table.columns = columns_;
        r.table.rows = std::move(rows);
        r.flagged = std::count(flags.begin(), flags.end(), 1);
        return r;
    }

    const SweepConfig& config() const { return cfg_; }

private:
    SweepConfig cfg_;
    std::shared_ptr<const LowTempSweeper> shared_lowtemp_;
    std::vector<std::string> columns_;

    std::vector<Cell> evaluate(const GridPoint& g, long index, bool& flagged) const {
        ChainSpec chain = cfg_.chain;
        NoSymPairSpec nosym = cfg_.nosym;
        CycleConfig cycle = cfg_.cycle;
        std::vector<Assignment> assign = cfg_.panels[g.panel].set;
        for (std::size_t a = 0; a < cfg_.axes.size(); ++a) assign.push_back({cfg_.axes[a].field, g.values[a]});
        std::stable_partition(assign.begin(), assign.end(), [](const Assignment& x) { return x.field != "ratio"; });
        for (const auto& x : assign) {
            if (cfg_.kind == FluidKind::Chain) apply_field(chain, cycle, x.field, x.value);
            else apply_field(nosym, cycle, x.field, x.value);
        }
        const bool is_chain = cfg_.kind == FluidKind::Chain;
        const double E1 = is_chain ? chain.E.front() : nosym.E1;
        const double EN = is_chain ? chain.E.back() : nosym.E2;
        std::vector<Cell> row{cfg_.panels[g.panel].name, index, E1 != 0.0 ? Cell(EN / E1) : Cell(),
                              E1, EN, cycle.tau1, cycle.tau2, cycle.beta1, cycle.beta2};
        std::vector<std::string> status;
        double scale = std::max({1.0, std::abs(E1), std::abs(EN)});
        if (is_chain) {
            for (const auto* v : {&chain.E, &chain.J, &chain.K, &chain.F})
                for (double x : *v) scale = std::max(scale, std::abs(x));
        } else {
            for (double x : {nosym.J_R, nosym.J_I, nosym.K_R, nosym.K_I, nosym.F}) scale = std::max(scale, std::abs(x));
        }
        try {
            cycle.validate();
            FluidPtr fluid;
            if (needs_dense(cfg_)) fluid = is_chain ? make_fluid(chain) : make_fluid(nosym);
            if (cfg_.wants("thermo") || cfg_.wants("regime") || cfg_.wants("ansatz")) {
                LimitCycleOptions opt;
                opt.method = cfg_.method;
                opt.tol = cfg_.tol;
                const LimitCycle lc = assemble_limit_cycle(fluid, cycle, opt);
                CycleThermo t;
                try {
                    t = limit_cycle_thermo(lc, *fluid);
                } catch (const InconsistencyError&) {
                    status.emplace_back("sign_pattern");
                    t.regime = Regime::Degenerate;
                    const Mat rho_a = reduce_to_front_site(lc.rho_ACB_star.matrix);
                    const Mat rho_b = reduce_to_back_site(lc.rho_ACB_tilde_star.matrix);
                    t.Q_H_star = fluid->E1 * (sz_expectation(rho_a) - sz_expectation(lc.bath_A));
                    t.Q_C_star = fluid->EN * (sz_expectation(rho_b) - sz_expectation(lc.bath_B));
                    t.W_star = -(t.Q_H_star + t.Q_C_star);
                    t.W_quench = t.W_star;
                    t.clausius_star = cycle.beta1 * t.Q_H_star + cycle.beta2 * t.Q_C_star;
                }
                if (t.first_law_residual() >= 1e-10 * scale) status.emplace_back("first_law");
                if (t.clausius_star < -1e-10) status.emplace_back("second_law");
                row.insert(row.end(), {t.Q_H_star, t.Q_C_star, t.W_star, t.W_quench, t.clausius_star,
                                       t.first_law_residual(), lc.residual, lc.loop_residual});
                if (cfg_.wants("regime")) {
                    row.emplace_back(std::string(to_string(t.regime)));
                    if (is_chain) {
                        row.emplace_back(E1 != 0.0 ? Cell(std::string(to_string(
                                                         predicted_regime(E1, EN, cycle.beta1, cycle.beta2))))
                                                   : Cell());
                    } else {
                        row.emplace_back(E1 != 0.0 ? Cell(join_regimes(allowed_nosym_regimes(
                                                         EN / E1, cycle.beta1, cycle.beta2)))
                                                   : Cell());
                    }
                }
                if (cfg_.wants("ansatz")) {
                    const AnsatzDecomposition a = extract_ansatz(t, E1, EN, cycle.beta1, cycle.beta2);
                    row.emplace_back(a.g_value);
                    row.push_back(a.valid ? Cell(a.f4_value) : Cell());
                    row.push_back(a.valid ? Cell(a.f4_from_hot) : Cell());
                }
            }
            if (cfg_.wants("lowtemp")) {
                std::shared_ptr<const LowTempSweeper> sw = shared_lowtemp_;
                if (!sw) sw = std::make_shared<const LowTempSweeper>(chain);
                const F2Result f = sw->evaluate(cycle.tau1, cfg_.lowtemp_budget);
                if (!f.converged) status.emplace_back("series_bounded");
                row.insert(row.end(), {f.f2, f.f2_lower, f.f2_upper, f.tail_bound, f.cycles, f.conservation_residual});
                if (E1 > 0.0 && EN > 0.0 && std::isfinite(cycle.beta1) && std::isfinite(cycle.beta2)) {
                    const auto x = LowTempParams::from_betas(E1, EN, cycle.beta1, cycle.beta2);
                    const double d = (x.x1 - x.x2) * f.f2;
                    row.insert(row.end(), {-d * E1, d * EN, d * (E1 - EN)});
                } else {
                    row.insert(row.end(), {Cell(), Cell(), Cell()});
                }
            }
            if (cfg_.wants("mixing")) {
                const Target target = cycle.mode == StrokeMode::TwoStroke ? Target::C : Target::CB;
                row.emplace_back(spectral_gap(make_channel(fluid, cycle, target)));
                row.emplace_back(spectral_gap(zero_temperature_channel(fluid, cycle, target)));
            }
            if (cfg_.wants("nosym_closed")) {
                const NoSymResult r = nosym_thermo(nosym, cycle);
                double dev = 0.0;
                if (cfg_.wants("thermo") || cfg_.wants("regime") || cfg_.wants("ansatz")) {
                    const std::size_t qh = 9;
                    dev = std::max(std::abs(std::get<double>(row[qh]) - r.thermo.Q_H_star),
                                   std::abs(std::get<double>(row[qh + 1]) - r.thermo.Q_C_star));
                }
                row.insert(row.end(), {r.thermo.Q_H_star, r.thermo.Q_C_star, r.thermo.W_star, r.p_up_star,
                                       std::string(to_string(r.thermo.regime)), dev});
            }
        } catch (const Error& e) {
            row.resize(columns_.size() - 1);
            std::string what = e.what();
            std::replace(what.begin(), what.end(), '\n', ' ');
            status.push_back("error: " + what);
        }
        row.resize(columns_.size() - 1);
        flagged = !status.empty();
        std::string st = "ok";
        if (flagged) {
            st = "flagged:";
            for (std::size_t k = 0; k < status.size(); ++k) st += (k ? ";" : "") + status[k];
        }
        row.emplace_back(st);
        return row;
    }
};

inline SweepResult run_sweep(const SweepConfig& cfg, int jobs = 1) { return SweepRunner(cfg).run(jobs); }

struct WrittenFiles {
    std::filesystem::path csv;
    std::filesystem::path sidecar;
};

inline WrittenFiles write_sweep(const SweepResult& r, const SweepConfig& cfg, const std::filesystem::path& dir) {
    WrittenFiles w{dir / (cfg.name + ".csv"), dir / (cfg.name + ".json")};
    write_text(w.csv, r.table.csv());
    write_text(w.sidecar, sidecar(cfg.name, cfg.canonical, r.table, r.flagged).dump(2) + "\n");
    return w;
}

}  // namespace spinmachine::harness
