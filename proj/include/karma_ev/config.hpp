#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "karma_ev/benchmarks.hpp"
#include "karma_ev/equilibrium.hpp"

namespace karma_ev {

inline constexpr const char* kVersion = "0.1.0";

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SimSettings {
    int agents = 10000;
    int days = 2000;
    int burn_in = 20;
    std::uint64_t seed = 0;
};

/// Everything one run needs. `setting` names the preset the model came
/// from, or "custom".
struct RunConfig {
    std::string setting = "custom";
    ModelParams model;
    SolverOptions solver;
    SimSettings sim;
    std::vector<Scheme> schemes{Scheme::fcfs, Scheme::edf};
    std::string out_dir = "out";
};

/// "moderate", "high" or "desk". Throws ConfigError otherwise.
RunConfig preset_config(const std::string& name);

/// JSON document:
///   {
///     "preset": "moderate",                 // optional base
///     "model": {
///       "delta_t": 1, "t_start": 7, "t_end": 19, "e_nom": 8,
///       "capacity": 2.0,                   // or one value per interval
///       "s_max": 64, "td_max": 8, "k_max": 18, "k_bar": 9,
///       "urgency_levels": [1, 9], "desired_soc_levels": [32, 48, 64],
///       "arrival": [0.25, ...],            // one per interval
///       "demand": {"deadline_hr": {"8": 0.75, "4": 0.25},
///                  "desired_soc_kwh": {"32": 0.75, ...},
///                  "urgency": {"1": 0.75, "9": 0.25}},
///       // or "demand": {"joint": [[td_hr, sd_kwh, u, p], ...]}
///       "epsilon": 1e-4, "delta_end": 0.99,
///       "carryover": "trip"
///     },
///     "solver": {"max_iters": 1000, "tol": 1e-3, "eta": 0.05,
///                "temp_start": 1, "temp_end": 0.01, "anneal_iters": 500,
///                "seed": 0, "dist_tol": 1e-10, "value_tol": 1e-9,
///                "auction": "smoothed"},
///     "simulation": {"agents": 10000, "days": 2000, "burn_in": 20, "seed": 0},
///     "schemes": ["fcfs", "edf"],
///     "out_dir": "out"
///   }
/// Missing fields keep the preset (or built-in) values. The demand law must
/// be restated whenever a grid changes. Throws ConfigError on any schema or
/// model violation.
RunConfig parse_config(const nlohmann::json& doc);

/// Reads and parses a config file; ConfigError also covers unreadable files.
RunConfig load_config(const std::string& path);

/// Canonical form of everything that affects results (the output
/// directory is left out).
nlohmann::json to_json(const RunConfig& config);

/// FNV-1a of the canonical form.
std::uint64_t config_hash(const RunConfig& config);

Scheme parse_scheme(const std::string& name);

}  // namespace karma_ev
