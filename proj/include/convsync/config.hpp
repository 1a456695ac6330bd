#pragma once

// Run configuration: a YAML document with the network instance and the
// settings of every scenario. Unknown keys are rejected.

#include "convsync/network_model.hpp"
#include "convsync/simulate.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace convsync {

enum class Scenario { SteadyState, Simulate, Linearize, Certify, Conditions, Roa };

Scenario parse_scenario(const std::string& name);
std::string scenario_name(Scenario s);
/// "dopri5" or "rosenbrock23".
Method parse_method(const std::string& name);
std::string method_name(Method m);

struct SteadyStateSettings {
    std::optional<Vec> gamma_star;  // used as is when given
    std::optional<Vec> input;       // target DC inputs, default i_dc* per node
    int pinned = 0;                 // 0-based
    int slack = 0;
    double tol = 1e-10;
    int max_iterations = 50;
};

struct SimulateSettings {
    Method method = Method::Dopri5;
    double t_end = 2.0;
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    int samples = 2001;
    std::optional<Vec> initial_gamma;  // absolute angles; other states at z*
    std::optional<Vec> initial_state;  // full packed state, overrides initial_gamma
    bool abc_output = true;
};

struct RoaConfig {
    std::vector<double> radii{0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0};
    int random_directions = 20;
    Method method = Method::Rosenbrock23;
    double rel_tol = 1e-6;
    double abs_tol = 1e-8;
    double t_end = 1000.0;
    double chunk = 10.0;
    int threads = 0;
};

struct ConvergenceSettings {
    std::optional<double> eps;  // default 1e-4 (1 + |z*|)
    double window = 0.2;
    std::optional<Vec> weights;  // per-slot diagonal weights for the orbit distance
};

struct RunConfig {
    NetworkSpec network;
    Scenario scenario = Scenario::SteadyState;
    SteadyStateSettings steady_state;
    SimulateSettings simulate;
    RoaConfig roa;
    ConvergenceSettings convergence;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    std::string source;  // raw text, hashed into report metadata
};

/// Throws ConfigError with "<origin>:<line>:<column>: message".
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<string>");

}  // namespace convsync
