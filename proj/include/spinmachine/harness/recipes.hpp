#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "spinmachine/harness/config.hpp"

namespace spinmachine::harness {

// Shipped figure recipes, kept byte-identical to recipes/*.json.
inline constexpr std::string_view k_fig2_recipe = R"recipe({
  "name": "fig2",
  "kind": "chain",
  "chain": {"N": 8, "E": 1.0, "J": 1.0, "K": 0.0, "F": 0.0},
  "cycle": {"beta1": 0.5, "beta2": 1.0, "tau1": 1.0, "tau2": 0.0, "mode": "two-stroke"},
  "axes": [{"field": "ratio", "start": -1.0, "stop": 2.0, "step": 0.05}],
  "analyses": ["thermo", "regime", "ansatz"]
}
)recipe";

inline constexpr std::string_view k_fig3_recipe = R"recipe({
  "name": "fig3",
  "kind": "chain",
  "chain": {"N": 1000, "E": {"linear": [1.0, 2.0]}, "J": 1.0, "K": 0.0, "F": 0.0},
  "cycle": {"beta1": 10.0, "beta2": 10.0, "tau1": 0.0, "tau2": 0.0, "mode": "two-stroke"},
  "axes": [{"field": "tau1", "linspace": [0.0, 50.0, 200]}],
  "analyses": ["lowtemp"],
  "lowtemp": {"budget": 100000}
}
)recipe";

inline constexpr std::string_view k_fig4_recipe = R"recipe({
  "name": "fig4",
  "kind": "nosym",
  "nosym": {"E1": 1.0, "E2": 1.0, "J_R": 0.375, "J_I": 0.0, "K_R": 0.075, "K_I": 0.0, "F": 0.0},
  "cycle": {"beta1": 0.3, "beta2": 0.6, "mode": "four-stroke"},
  "panels": [
    {"name": "tau1=1 tau2=1", "set": {"tau1": 1.0, "tau2": 1.0}},
    {"name": "tau1=2 tau2=2", "set": {"tau1": 2.0, "tau2": 2.0}},
    {"name": "tau1=3 tau2=0", "set": {"tau1": 3.0, "tau2": 0.0}}
  ],
  "axes": [{"field": "E2", "start": -3.0, "stop": 3.0, "step": 0.01}],
  "analyses": ["thermo", "regime", "nosym_closed"]
}
)recipe";

inline constexpr std::string_view k_fig5_recipe = R"recipe({
  "name": "fig5",
  "kind": "nosym",
  "nosym": {"E1": 1.0, "E2": 1.0, "J_R": 0.375, "J_I": 0.0, "K_R": 0.075, "K_I": 0.0, "F": 0.0},
  "cycle": {"beta1": 0.3, "beta2": 0.6, "mode": "four-stroke"},
  "panels": [
    {"name": "E1=-2 E2=1.5", "set": {"E1": -2.0, "E2": 1.5}},
    {"name": "E1=1 E2=0.25", "set": {"E1": 1.0, "E2": 0.25}},
    {"name": "E1=1 E2=0.75", "set": {"E1": 1.0, "E2": 0.75}},
    {"name": "E1=1 E2=1.5", "set": {"E1": 1.0, "E2": 1.5}}
  ],
  "axes": [
    {"field": "tau1", "start": 0.0, "stop": 6.0, "step": 0.1},
    {"field": "tau2", "start": 0.0, "stop": 6.0, "step": 0.1}
  ],
  "analyses": ["thermo", "regime", "nosym_closed"]
}
)recipe";

inline std::vector<std::string> recipe_names() { return {"fig2", "fig3", "fig4", "fig5"}; }

inline std::string_view recipe_text(const std::string& name) {
    if (name == "fig2") return k_fig2_recipe;
    if (name == "fig3") return k_fig3_recipe;
    if (name == "fig4") return k_fig4_recipe;
    if (name == "fig5") return k_fig5_recipe;
    throw ConfigError("unknown figure '" + name + "', expected fig2, fig3, fig4 or fig5");
}

inline SweepConfig recipe(const std::string& name) { return parse_config_text(std::string(recipe_text(name))); }

}  // namespace spinmachine::harness
