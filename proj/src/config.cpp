#include "convsync/config.hpp"

#include "convsync/errors.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace convsync {

namespace {

class Reader {
public:
    explicit Reader(std::string origin) : origin_(std::move(origin)) {}

    [[noreturn]] void fail(const YAML::Node& node, const std::string& what) const {
        const YAML::Mark m = node.Mark();
        throw ConfigError("config", where(m) + what);
    }

    std::string where(const YAML::Mark& m) const {
        if (m.is_null()) return origin_ + ": ";
        return origin_ + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1) + ": ";
    }

    void require_map(const YAML::Node& node, const std::string& path) const {
        if (!node.IsMap()) fail(node, "'" + path + "' must be a mapping");
    }

    void check_keys(const YAML::Node& node, const std::string& path, const std::set<std::string>& allowed) const {
        require_map(node, path);
        for (const auto& kv : node) {
            const std::string key = kv.first.as<std::string>();
            if (!allowed.count(key)) fail(kv.first, "unknown key '" + (path.empty() ? key : path + "." + key) + "'");
        }
    }

    template <class T>
    T scalar(const YAML::Node& node, const std::string& path) const {
        if (!node.IsScalar()) fail(node, "'" + path + "' must be a scalar");
        try {
            return node.as<T>();
        } catch (const YAML::Exception&) {
            fail(node, "'" + path + "' has an invalid value '" + node.Scalar() + "'");
        }
    }

    template <class T>
    void read(const YAML::Node& parent, const char* key, const std::string& path, T& out) const {
        if (const YAML::Node n = parent[key]) out = scalar<T>(n, path + key);
    }

    Vec vector(const YAML::Node& node, const std::string& path) const {
        if (!node.IsSequence()) fail(node, "'" + path + "' must be a list of numbers");
        Vec v(static_cast<Eigen::Index>(node.size()));
        for (std::size_t i = 0; i < node.size(); ++i) v(static_cast<Eigen::Index>(i)) = scalar<double>(node[i], path);
        return v;
    }

private:
    std::string origin_;
};

void read_converter(const Reader& r, const YAML::Node& node, ConverterParams& c) {
    r.check_keys(node, "network.converter",
                 {"mu", "eta", "k_p", "c_dc", "g_dc", "l_f", "r_f", "c_f", "g_load", "v_dc_star", "i_dc_star",
                  "omega_star"});
    const std::string p = "network.converter.";
    r.read(node, "mu", p, c.mu);
    r.read(node, "eta", p, c.eta);
    r.read(node, "k_p", p, c.k_p);
    r.read(node, "c_dc", p, c.c_dc);
    r.read(node, "g_dc", p, c.g_dc);
    r.read(node, "l_f", p, c.l_f);
    r.read(node, "r_f", p, c.r_f);
    r.read(node, "c_f", p, c.c_f);
    r.read(node, "g_load", p, c.g_load);
    r.read(node, "v_dc_star", p, c.v_dc_star);
    r.read(node, "i_dc_star", p, c.i_dc_star);
    r.read(node, "omega_star", p, c.omega_star);
}

void read_network(const Reader& r, const YAML::Node& node, NetworkSpec& spec) {
    r.check_keys(node, "network", {"n", "edges", "converter", "line"});
    if (!node["n"]) r.fail(node, "missing required field 'network.n'");
    if (!node["edges"]) r.fail(node, "missing required field 'network.edges'");
    spec.n = r.scalar<int>(node["n"], "network.n");
    const YAML::Node edges = node["edges"];
    if (!edges.IsSequence()) r.fail(edges, "'network.edges' must be a list of [from, to] pairs");
    spec.edges.clear();
    for (const auto& e : edges) {
        if (!e.IsSequence() || e.size() != 2) r.fail(e, "each edge must be a pair [from, to] of 1-based node indices");
        const int from = r.scalar<int>(e[0], "network.edges"), to = r.scalar<int>(e[1], "network.edges");
        if (from < 1 || from > spec.n || to < 1 || to > spec.n)
            r.fail(e, "edge [" + std::to_string(from) + ", " + std::to_string(to) + "] references a node outside 1.." +
                          std::to_string(spec.n));
        if (from == to) r.fail(e, "edge [" + std::to_string(from) + ", " + std::to_string(to) + "] is a self-loop");
        spec.edges.push_back({from - 1, to - 1});
    }
    if (const YAML::Node c = node["converter"]) read_converter(r, c, spec.converter);
    if (const YAML::Node l = node["line"]) {
        r.check_keys(l, "network.line", {"r_line", "l_line"});
        r.read(l, "r_line", "network.line.", spec.line.r_line);
        r.read(l, "l_line", "network.line.", spec.line.l_line);
    }
    try {
        spec.validate();
    } catch (const InvalidSpecError& e) {
        r.fail(node, e.what());
    }
}

int node_index(const Reader& r, const YAML::Node& node, const std::string& path, int n) {
    const int k = r.scalar<int>(node, path);
    if (k < 1 || k > n) r.fail(node, "'" + path + "' must lie in 1.." + std::to_string(n));
    return k - 1;
}

Method read_method(const Reader& r, const YAML::Node& node, const std::string& path) {
    try {
        return parse_method(r.scalar<std::string>(node, path));
    } catch (const ConfigError& e) {
        r.fail(node, e.what());
    }
}

}  // namespace

Method parse_method(const std::string& name) {
    if (name == "dopri5") return Method::Dopri5;
    if (name == "rosenbrock23") return Method::Rosenbrock23;
    throw ConfigError("config", "unknown integration method '" + name + "' (expected dopri5 or rosenbrock23)");
}

std::string method_name(Method m) { return m == Method::Rosenbrock23 ? "rosenbrock23" : "dopri5"; }

Scenario parse_scenario(const std::string& name) {
    if (name == "steady-state") return Scenario::SteadyState;
    if (name == "simulate") return Scenario::Simulate;
    if (name == "linearize") return Scenario::Linearize;
    if (name == "certify") return Scenario::Certify;
    if (name == "conditions") return Scenario::Conditions;
    if (name == "roa") return Scenario::Roa;
    throw ConfigError("config", "unknown scenario '" + name +
                                    "' (expected steady-state, simulate, linearize, certify, conditions or roa)");
}

std::string scenario_name(Scenario s) {
    switch (s) {
        case Scenario::SteadyState: return "steady-state";
        case Scenario::Simulate: return "simulate";
        case Scenario::Linearize: return "linearize";
        case Scenario::Certify: return "certify";
        case Scenario::Conditions: return "conditions";
        case Scenario::Roa: return "roa";
    }
    return "unknown";
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    const Reader r(origin);
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError("config", r.where(e.mark) + "parse error: " + e.msg);
    }
    if (!root || root.IsNull()) throw ConfigError("config", origin + ": empty configuration");
    r.check_keys(root, "", {"network", "scenario", "steady_state", "simulate", "roa", "convergence", "seed", "output"});

    RunConfig cfg;
    cfg.source = text;
    if (!root["network"]) r.fail(root, "missing required section 'network'");
    read_network(r, root["network"], cfg.network);
    const int n = cfg.network.n;
    const StateLayout layout(cfg.network);

    if (const YAML::Node s = root["scenario"]) {
        try {
            cfg.scenario = parse_scenario(r.scalar<std::string>(s, "scenario"));
        } catch (const ConfigError& e) {
            r.fail(s, e.what());
        }
    }
    if (const YAML::Node s = root["seed"]) cfg.seed = r.scalar<std::uint64_t>(s, "seed");

    if (const YAML::Node s = root["steady_state"]) {
        r.check_keys(s, "steady_state", {"gamma_star", "input", "pinned", "slack", "tol", "max_iterations"});
        auto& ss = cfg.steady_state;
        if (const YAML::Node g = s["gamma_star"]) {
            ss.gamma_star = r.vector(g, "steady_state.gamma_star");
            if (ss.gamma_star->size() != n) r.fail(g, "'steady_state.gamma_star' must have n entries");
        }
        if (const YAML::Node g = s["input"]) {
            ss.input = r.vector(g, "steady_state.input");
            if (ss.input->size() != n) r.fail(g, "'steady_state.input' must have n entries");
        }
        if (const YAML::Node g = s["pinned"]) ss.pinned = node_index(r, g, "steady_state.pinned", n);
        if (const YAML::Node g = s["slack"]) ss.slack = node_index(r, g, "steady_state.slack", n);
        r.read(s, "tol", "steady_state.", ss.tol);
        r.read(s, "max_iterations", "steady_state.", ss.max_iterations);
        if (!(ss.tol > 0.0)) r.fail(s, "'steady_state.tol' must be positive");
        if (ss.max_iterations < 1) r.fail(s, "'steady_state.max_iterations' must be at least 1");
    }

    if (const YAML::Node s = root["simulate"]) {
        r.check_keys(s, "simulate",
                     {"method", "t_end", "rel_tol", "abs_tol", "samples", "initial_gamma", "initial_state", "abc_output"});
        auto& sim = cfg.simulate;
        if (const YAML::Node g = s["method"]) sim.method = read_method(r, g, "simulate.method");
        r.read(s, "t_end", "simulate.", sim.t_end);
        r.read(s, "rel_tol", "simulate.", sim.rel_tol);
        r.read(s, "abs_tol", "simulate.", sim.abs_tol);
        r.read(s, "samples", "simulate.", sim.samples);
        r.read(s, "abc_output", "simulate.", sim.abc_output);
        if (const YAML::Node g = s["initial_gamma"]) {
            sim.initial_gamma = r.vector(g, "simulate.initial_gamma");
            if (sim.initial_gamma->size() != n) r.fail(g, "'simulate.initial_gamma' must have n entries");
        }
        if (const YAML::Node g = s["initial_state"]) {
            sim.initial_state = r.vector(g, "simulate.initial_state");
            if (sim.initial_state->size() != layout.size())
                r.fail(g, "'simulate.initial_state' must have 6n + 2m = " + std::to_string(layout.size()) + " entries");
        }
        if (!(sim.t_end > 0.0)) r.fail(s, "'simulate.t_end' must be positive");
        if (!(sim.rel_tol > 0.0) || !(sim.abs_tol > 0.0)) r.fail(s, "simulate tolerances must be positive");
        if (sim.samples < 2) r.fail(s, "'simulate.samples' must be at least 2");
    }

    if (const YAML::Node s = root["roa"]) {
        r.check_keys(s, "roa", {"radii", "random_directions", "method", "rel_tol", "abs_tol", "t_end", "chunk", "threads"});
        auto& roa = cfg.roa;
        if (const YAML::Node g = s["method"]) roa.method = read_method(r, g, "roa.method");
        r.read(s, "rel_tol", "roa.", roa.rel_tol);
        r.read(s, "abs_tol", "roa.", roa.abs_tol);
        if (!(roa.rel_tol > 0.0) || !(roa.abs_tol > 0.0)) r.fail(s, "roa tolerances must be positive");
        if (const YAML::Node g = s["radii"]) {
            const Vec v = r.vector(g, "roa.radii");
            roa.radii.assign(v.data(), v.data() + v.size());
            for (double x : roa.radii)
                if (!(x > 0.0)) r.fail(g, "'roa.radii' entries must be positive");
            if (roa.radii.empty()) r.fail(g, "'roa.radii' must not be empty");
        }
        r.read(s, "random_directions", "roa.", roa.random_directions);
        r.read(s, "t_end", "roa.", roa.t_end);
        r.read(s, "chunk", "roa.", roa.chunk);
        r.read(s, "threads", "roa.", roa.threads);
        if (roa.random_directions < 0) r.fail(s, "'roa.random_directions' must be non-negative");
        if (!(roa.t_end > 0.0) || !(roa.chunk > 0.0)) r.fail(s, "'roa.t_end' and 'roa.chunk' must be positive");
    }

    if (const YAML::Node s = root["convergence"]) {
        r.check_keys(s, "convergence", {"eps", "window", "weights"});
        auto& c = cfg.convergence;
        if (const YAML::Node g = s["eps"]) {
            c.eps = r.scalar<double>(g, "convergence.eps");
            if (!(*c.eps > 0.0)) r.fail(g, "'convergence.eps' must be positive");
        }
        r.read(s, "window", "convergence.", c.window);
        if (!(c.window > 0.0)) r.fail(s, "'convergence.window' must be positive");
        if (const YAML::Node g = s["weights"]) {
            c.weights = r.vector(g, "convergence.weights");
            if (c.weights->size() != layout.size())
                r.fail(g, "'convergence.weights' must have 6n + 2m = " + std::to_string(layout.size()) + " entries");
            if ((c.weights->array() < 0.0).any()) r.fail(g, "'convergence.weights' must be non-negative");
        }
    }

    if (const YAML::Node s = root["output"]) {
        r.check_keys(s, "output", {"dir"});
        r.read(s, "dir", "output.", cfg.output_dir);
    }
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config", path + ": cannot open configuration file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

}  // namespace convsync
