#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "spinmachine/cycle.hpp"
#include "spinmachine/spinchain.hpp"

namespace spinmachine::harness {

using json = nlohmann::json;

struct ConfigError : Error {
    using Error::Error;
};

enum class FluidKind { Chain, NoSym };

struct Axis {
    std::string field;
    std::vector<double> values;
};

struct Assignment {
    std::string field;
    double value = 0.0;
};

struct Panel {
    std::string name;
    std::vector<Assignment> set;
};

struct SweepConfig {
    std::string name = "sweep";
    FluidKind kind = FluidKind::Chain;
    ChainSpec chain;
    NoSymPairSpec nosym;
    CycleConfig cycle;
    std::vector<Axis> axes;
    std::vector<Panel> panels;
    std::set<std::string> analyses;
    FixedPointMethod method = FixedPointMethod::Direct;
    double tol = 1e-12;
    std::uint64_t seed = 0;
    long lowtemp_budget = 10000000;
    // Canonical serialization of the parsed input, used for the provenance hash.
    std::string canonical;

    bool wants(const std::string& a) const { return analyses.count(a) > 0; }
};

inline const std::set<std::string>& known_analyses() {
    static const std::set<std::string> s{"thermo", "regime", "ansatz", "lowtemp", "mixing", "nosym_closed"};
    return s;
}

inline const std::set<std::string>& chain_fields() {
    static const std::set<std::string> s{"ratio", "tau1", "tau2", "beta1", "beta2", "E1", "EN", "E2", "J", "K", "F"};
    return s;
}

inline const std::set<std::string>& nosym_fields() {
    static const std::set<std::string> s{"ratio", "tau1", "tau2", "beta1", "beta2", "E1", "E2", "EN",
                                         "J_R", "J_I", "K_R", "K_I", "F"};
    return s;
}

inline bool is_chain_shape_field(const std::string& f) {
    return f == "ratio" || f == "E1" || f == "EN" || f == "E2" || f == "J" || f == "K" || f == "F";
}

// Rounds grid values to 12 decimals so that e.g. -1 + 30 * 0.05 is exactly 0.5.
inline double snap(double v) { return std::round(v * 1e12) / 1e12; }

inline std::vector<double> grid_values(const json& j, const std::string& where) {
    if (j.contains("values")) {
        std::vector<double> v = j.at("values").get<std::vector<double>>();
        if (v.empty()) throw ConfigError(where + ": empty value list");
        return v;
    }
    if (j.contains("linspace")) {
        const auto l = j.at("linspace");
        if (!l.is_array() || l.size() != 3) throw ConfigError(where + ": linspace needs [start, stop, count]");
        const double a = l[0].get<double>(), b = l[1].get<double>();
        const int n = l[2].get<int>();
        if (n < 1) throw ConfigError(where + ": linspace count must be >= 1");
        std::vector<double> v(n);
        for (int k = 0; k < n; ++k) v[k] = n == 1 ? a : a + (b - a) * k / (n - 1);
        return v;
    }
    if (j.contains("start") && j.contains("stop") && j.contains("step")) {
        const double a = j.at("start").get<double>(), b = j.at("stop").get<double>(), s = j.at("step").get<double>();
        if (!(s > 0.0) || !(b >= a)) throw ConfigError(where + ": need step > 0 and stop >= start");
        const long n = std::lround((b - a) / s) + 1;
        if (n > 10000000) throw ConfigError(where + ": grid too large");
        std::vector<double> v(n);
        for (long k = 0; k < n; ++k) v[k] = snap(a + s * static_cast<double>(k));
        return v;
    }
    throw ConfigError(where + ": expected values, linspace or start/stop/step");
}

// A chain field given as a scalar, an explicit array or {"linear": [first, last]}.
inline std::vector<double> chain_array(const json& j, int count, const std::string& key) {
    if (j.is_number()) return std::vector<double>(count, j.get<double>());
    if (j.is_array()) {
        auto v = j.get<std::vector<double>>();
        if (static_cast<int>(v.size()) != count)
            throw ConfigError("chain." + key + ": expected " + std::to_string(count) + " entries");
        return v;
    }
    if (j.is_object() && j.contains("linear")) {
        const auto l = j.at("linear");
        if (!l.is_array() || l.size() != 2) throw ConfigError("chain." + key + ": linear needs [first, last]");
        const double a = l[0].get<double>(), b = l[1].get<double>();
        std::vector<double> v(count);
        for (int k = 0; k < count; ++k) v[k] = count == 1 ? a : a + (b - a) * k / (count - 1);
        return v;
    }
    throw ConfigError("chain." + key + ": unsupported value");
}

inline StrokeMode parse_mode(const std::string& s) {
    if (s == "four-stroke") return StrokeMode::FourStroke;
    if (s == "two-stroke") return StrokeMode::TwoStroke;
    throw ConfigError("cycle.mode must be four-stroke or two-stroke");
}

inline FixedPointMethod parse_method(const std::string& s) {
    if (s == "direct") return FixedPointMethod::Direct;
    if (s == "power") return FixedPointMethod::Power;
    if (s == "eigen") return FixedPointMethod::Eigen;
    throw ConfigError("method must be direct, power or eigen");
}

inline void check_field(const SweepConfig& c, const std::string& f, const std::string& where) {
    const auto& allowed = c.kind == FluidKind::Chain ? chain_fields() : nosym_fields();
    if (!allowed.count(f)) throw ConfigError(where + ": unknown field '" + f + "'");
}

inline SweepConfig parse_config(const json& j) {
    try {
        SweepConfig c;
        c.canonical = j.dump();
        c.name = j.value("name", std::string("sweep"));
        const std::string kind = j.value("kind", std::string("chain"));
        if (kind == "chain") {
            c.kind = FluidKind::Chain;
            const json& ch = j.at("chain");
            const int n = ch.at("N").get<int>();
            if (n < 2) throw ConfigError("chain.N must be >= 2");
            c.chain.E = chain_array(ch.at("E"), n, "E");
            c.chain.J = chain_array(ch.value("J", json(0.0)), n - 1, "J");
            c.chain.K = chain_array(ch.value("K", json(0.0)), n - 1, "K");
            c.chain.F = chain_array(ch.value("F", json(0.0)), n - 1, "F");
            c.chain.validate();
        } else if (kind == "nosym") {
            c.kind = FluidKind::NoSym;
            const json& ns = j.at("nosym");
            c.nosym.E1 = ns.value("E1", 0.0);
            c.nosym.E2 = ns.value("E2", 0.0);
            c.nosym.J_R = ns.value("J_R", 0.0);
            c.nosym.J_I = ns.value("J_I", 0.0);
            c.nosym.K_R = ns.value("K_R", 0.0);
            c.nosym.K_I = ns.value("K_I", 0.0);
            c.nosym.F = ns.value("F", 0.0);
            c.nosym.validate();
        } else {
            throw ConfigError("kind must be chain or nosym");
        }
        const json cy = j.value("cycle", json::object());
        c.cycle.beta1 = cy.value("beta1", 1.0);
        c.cycle.beta2 = cy.value("beta2", 1.0);
        c.cycle.tau1 = cy.value("tau1", 1.0);
        c.cycle.tau2 = cy.value("tau2", 1.0);
        c.cycle.mode = parse_mode(cy.value("mode", std::string("four-stroke")));
        c.cycle.validate();
        for (const auto& a : j.value("axes", json::array())) {
            Axis ax;
            ax.field = a.at("field").get<std::string>();
            check_field(c, ax.field, "axes");
            ax.values = grid_values(a, "axis " + ax.field);
            c.axes.push_back(std::move(ax));
        }
        for (const auto& p : j.value("panels", json::array())) {
            Panel pn;
            pn.name = p.at("name").get<std::string>();
            for (const auto& [k, v] : p.at("set").items()) {
                check_field(c, k, "panel " + pn.name);
                pn.set.push_back({k, v.get<double>()});
            }
            c.panels.push_back(std::move(pn));
        }
        if (c.panels.empty()) c.panels.push_back({"main", {}});
        for (const auto& a : j.value("analyses", json::array({"thermo", "regime"}))) {
            const auto s = a.get<std::string>();
            if (!known_analyses().count(s)) throw ConfigError("unknown analysis '" + s + "'");
            c.analyses.insert(s);
        }
        if (c.kind == FluidKind::NoSym && c.wants("lowtemp"))
            throw ConfigError("lowtemp analysis needs a chain");
        if (c.kind == FluidKind::Chain && c.wants("nosym_closed"))
            throw ConfigError("nosym_closed analysis needs kind nosym");
        c.method = parse_method(j.value("method", std::string("direct")));
        c.tol = j.value("tol", 1e-12);
        if (!(c.tol > 0.0)) throw ConfigError("tol must be positive");
        c.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("lowtemp")) c.lowtemp_budget = j.at("lowtemp").value("budget", c.lowtemp_budget);
        if (c.lowtemp_budget < 1) throw ConfigError("lowtemp.budget must be >= 1");
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

inline SweepConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return parse_config(j);
}

// Applies one field assignment; "ratio" scales the last site by E1.
inline void apply_field(ChainSpec& s, CycleConfig& c, const std::string& f, double v) {
    if (f == "tau1") c.tau1 = v;
    else if (f == "tau2") c.tau2 = v;
    else if (f == "beta1") c.beta1 = v;
    else if (f == "beta2") c.beta2 = v;
    else if (f == "E1") s.E.front() = v;
    else if (f == "EN" || f == "E2") s.E.back() = v;
    else if (f == "ratio") s.E.back() = v * s.E.front();
    else if (f == "J") s.J.assign(s.J.size(), v);
    else if (f == "K") s.K.assign(s.K.size(), v);
    else if (f == "F") s.F.assign(s.F.size(), v);
    else throw ConfigError("unknown chain field '" + f + "'");
}

inline void apply_field(NoSymPairSpec& s, CycleConfig& c, const std::string& f, double v) {
    if (f == "tau1") c.tau1 = v;
    else if (f == "tau2") c.tau2 = v;
    else if (f == "beta1") c.beta1 = v;
    else if (f == "beta2") c.beta2 = v;
    else if (f == "E1") s.E1 = v;
    else if (f == "E2" || f == "EN") s.E2 = v;
    else if (f == "ratio") s.E2 = v * s.E1;
    else if (f == "J_R") s.J_R = v;
    else if (f == "J_I") s.J_I = v;
    else if (f == "K_R") s.K_R = v;
    else if (f == "K_I") s.K_I = v;
    else if (f == "F") s.F = v;
    else throw ConfigError("unknown nosym field '" + f + "'");
}

}  // namespace spinmachine::harness
