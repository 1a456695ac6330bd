#include "convsync/cli.hpp"

#include "convsync/certificate.hpp"
#include "convsync/conditions.hpp"
#include "convsync/errors.hpp"
#include "convsync/linearize.hpp"
#include "convsync/matrix_algebra.hpp"
#include "convsync/report.hpp"
#include "convsync/simulate.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <numbers>

namespace convsync {

namespace {

struct Context {
    const RunConfig& cfg;
    std::ostream& log;
    std::ostream& err;  // reasons for a nonzero exit
    std::filesystem::path out;

    Json header() const { return metadata(cfg.source, scenario_name(cfg.scenario)); }
    void write_json(const std::string& name, const Json& body) const {
        Json doc;
        doc["metadata"] = header();
        for (auto it = body.begin(); it != body.end(); ++it) doc[it.key()] = it.value();
        write_file((out / name).string(), dump_json(doc));
        log << "wrote " << (out / name).string() << "\n";
    }
    void write_text(const std::string& name, const std::string& text) const {
        write_file((out / name).string(), text);
        log << "wrote " << (out / name).string() << "\n";
    }
};

Json solver_json(const RunConfig& cfg, const SteadyState& ss) {
    Json j;
    if (cfg.steady_state.gamma_star) {
        j["source"] = "configured angles";
        return j;
    }
    const Vec target = cfg.steady_state.input.value_or(Vec::Constant(cfg.network.n, cfg.network.converter.i_dc_star));
    j["source"] = "newton inversion of the input";
    j["target_input"] = to_json(target);
    j["pinned_node"] = cfg.steady_state.pinned + 1;
    j["slack_node"] = cfg.steady_state.slack + 1;
    j["slack_mismatch"] = ss.u_star(cfg.steady_state.slack) - target(cfg.steady_state.slack);
    return j;
}

int run_steady_state(const Context& ctx) {
    const SteadyState ss = resolve_steady_state(ctx.cfg);
    const Network net(ctx.cfg.network);
    double worst = 0.0;
    for (int i = 0; i < 32; ++i) {
        const double th = 2.0 * std::numbers::pi * i / 32;
        worst = std::max(worst, net(orbit_point(ss, th), ss.u_star).norm());
    }
    Json body;
    body["solver"] = solver_json(ctx.cfg, ss);
    body["steady_state"] = to_json(ss, ctx.cfg.network);
    body["orbit_max_residual"] = worst;
    body["residual_bound"] = 1e-9 * (1.0 + ss.z_star.norm());
    ctx.write_json("steady_state.json", body);
    return kExitOk;
}

int run_linearize(const Context& ctx) {
    const SteadyState ss = resolve_steady_state(ctx.cfg);
    const LinearizedSystem lin = jacobian(ss, ctx.cfg.network);
    const EigenSplit split = eigen_split(lin);

    CsvWriter csv({"index", "real", "imag", "class"});
    for (Eigen::Index i = 0; i < split.eigenvalues.size(); ++i) {
        const auto l = split.eigenvalues(i);
        const char* cls = std::abs(l) <= split.tol_zero ? "zero" : (l.real() < -split.tol_zero ? "stable" : "unstable");
        csv.row({std::to_string(i), format_double(l.real()), format_double(l.imag()), cls});
    }
    ctx.write_text("eigenvalues.csv", csv.str());

    Json body;
    body["split"] = to_json(split);
    body["kernel_vector"] = to_json(lin.kernel_vector);
    body["kernel_residual"] = (lin.jacobian * lin.kernel_vector).norm();
    body["hessian_u"] = to_json(Vec(lin.hessian_u.diagonal()));
    body["a11_spectral_abscissa"] = spectral_abscissa(lin.A11);
    ctx.write_json("linearize.json", body);
    if (!split.stable_split()) {
        ctx.err << "eigenvalue split: " << split.zero_modes << " zero mode(s), " << split.unstable_count
                << " unstable; a single zero mode with all others stable is required\n";
        return kExitAssumption;
    }
    return kExitOk;
}

int run_certify(const Context& ctx) {
    const SteadyState ss = resolve_steady_state(ctx.cfg);
    const LinearizedSystem lin = jacobian(ss, ctx.cfg.network);
    Json body;
    int code = kExitOk;
    try {
        body["gamma_diagnostic"] = to_json(gamma_diagnostic(lin, ctx.cfg.network));
    } catch (const NumericalError& e) {
        body["gamma_diagnostic"] = Json{{"error", e.what()}};
    }
    try {
        const Certificate cert = build_certificate(lin);
        body["certificate"] = to_json(cert);
        if (!cert.valid()) {
            ctx.err << "certificate built but P or Q(P) fails its definiteness test\n";
            code = kExitAssumption;
        }
    } catch (const AssumptionError& e) {
        Json f;
        f["assumption"] = e.assumption();
        f["message"] = e.what();
        f["measured"] = std::isfinite(e.measured()) ? Json(e.measured()) : Json(nullptr);
        body["certificate"] = Json{{"valid", false}, {"failure", f}};
        ctx.err << "assumption violated: " << e.what() << "\n";
        code = kExitAssumption;
    }
    ctx.write_json("certificate.json", body);
    return code;
}

int run_conditions(const Context& ctx) {
    const SteadyState ss = resolve_steady_state(ctx.cfg);
    const LinearizedSystem lin = jacobian(ss, ctx.cfg.network);
    const ConditionReport rep = evaluate_conditions(ss, lin, ctx.cfg.network);
    Json body;
    body["conditions"] = to_json(rep);
    body["stable_split"] = eigen_split(lin).stable_split();
    ctx.write_json("conditions.json", body);
    for (const auto& f : rep.failures) ctx.err << "condition failed: " << f << "\n";
    return rep.all_satisfied ? kExitOk : kExitAssumption;
}

SettleOptions settle_options(const RunConfig& cfg, double t_end) {
    SettleOptions so;
    so.integration.t_end = t_end;
    so.integration.method = cfg.roa.method;
    so.integration.rel_tol = cfg.roa.rel_tol;
    so.integration.abs_tol = cfg.roa.abs_tol;
    so.chunk = cfg.roa.chunk;
    so.eps = cfg.convergence.eps.value_or(-1.0);
    so.window = cfg.convergence.window;
    so.weights = cfg.convergence.weights;
    return so;
}

int run_simulate(const Context& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const SteadyState ss = resolve_steady_state(cfg);
    const Network net(cfg.network);
    Vec z0 = ss.z_star;
    if (cfg.simulate.initial_state)
        z0 = *cfg.simulate.initial_state;
    else if (cfg.simulate.initial_gamma)
        z0.segment(ss.layout.gamma(), ss.layout.n) = *cfg.simulate.initial_gamma;

    IntegrateOptions io;
    io.method = cfg.simulate.method;
    io.t_end = cfg.simulate.t_end;
    io.rel_tol = cfg.simulate.rel_tol;
    io.abs_tol = cfg.simulate.abs_tol;
    io.default_samples = cfg.simulate.samples;
    io.tail_window = cfg.convergence.window;
    Trajectory tr;
    int code = kExitOk;
    Json body;
    try {
        tr = integrate(net, ss.u_star, z0, io);
    } catch (const StiffnessError& e) {
        tr = e.partial();
        body["error"] = e.what();
        ctx.err << "numerical failure: " << e.what() << "; partial trajectory written\n";
        code = kExitNumerical;
    }
    const double eps = cfg.convergence.eps.value_or(default_orbit_eps(ss));
    const ConvergenceCheck c = converges_to_orbit(tr, ss, eps, cfg.convergence.window, 1e-4, cfg.convergence.weights);
    ctx.write_text("trajectory.csv", trajectory_csv(tr, ss.layout));
    if (cfg.simulate.abc_output)
        ctx.write_text("trajectory_abc.csv", trajectory_abc_csv(tr, ss.layout, cfg.network.converter.omega_star));

    body["method"] = method_name(cfg.simulate.method);
    body["t_end"] = tr.times.empty() ? 0.0 : tr.times.back();
    body["accepted_steps"] = tr.accepted_steps;
    body["rejected_steps"] = tr.rejected_steps;
    body["diverged"] = tr.diverged;
    body["converged"] = c.converged;
    body["final_orbit_distance"] = c.final_distance;
    body["eps"] = eps;
    body["limit_theta"] = c.limit_theta;
    body["theta_drift"] = c.theta_drift;
    if (!tr.states.empty())
        body["final_v_dc"] = to_json(Vec(tr.states.back().segment(ss.layout.v_dc(), ss.layout.n)));
    ctx.write_json("simulate.json", body);
    return code;
}

int run_roa(const Context& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const SteadyState ss = resolve_steady_state(cfg);
    RoaSettings rs;
    rs.settle = settle_options(cfg, cfg.roa.t_end);
    rs.threads = cfg.roa.threads;
    const auto dirs = roa_directions(cfg.network.n, cfg.roa.random_directions, cfg.seed);
    const RoaEstimate est = roa_sample(ss, cfg.network, dirs, cfg.roa.radii, rs);
    Json body;
    body["seed"] = cfg.seed;
    body["method"] = method_name(cfg.roa.method);
    body["horizon"] = cfg.roa.t_end;
    body["roa"] = to_json(est);
    ctx.write_json("roa.json", body);
    ctx.write_text("roa_samples.csv", roa_samples_csv(est));
    ctx.log << "all-converge radius " << est.largest_all_converge_radius << "\n";
    return kExitOk;
}

}  // namespace

SteadyState resolve_steady_state(const RunConfig& cfg) {
    const auto& s = cfg.steady_state;
    if (s.gamma_star) return recover_steady_state(*s.gamma_star, cfg.network);
    const Vec target = s.input.value_or(Vec::Constant(cfg.network.n, cfg.network.converter.i_dc_star));
    GammaSolveOptions o;
    o.pinned = s.pinned;
    o.slack = s.slack;
    o.tol = s.tol;
    o.max_iterations = s.max_iterations;
    const GammaSolveResult g = solve_gamma_from_input(target, cfg.network, o);
    if (!g.converged)
        throw NumericalError("steady_state", "angle solve did not converge (residual " + std::to_string(g.residual) +
                                                 " after " + std::to_string(g.iterations) + " iterations)");
    return recover_steady_state(g.gamma, cfg.network);
}

int run(const RunConfig& cfg, std::ostream& log, std::ostream& err) {
    try {
        std::filesystem::create_directories(cfg.output_dir);
        const Context ctx{cfg, log, err, cfg.output_dir};
        switch (cfg.scenario) {
            case Scenario::SteadyState: return run_steady_state(ctx);
            case Scenario::Linearize: return run_linearize(ctx);
            case Scenario::Certify: return run_certify(ctx);
            case Scenario::Conditions: return run_conditions(ctx);
            case Scenario::Simulate: return run_simulate(ctx);
            case Scenario::Roa: return run_roa(ctx);
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InvalidSpecError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const AssumptionError& e) {
        err << "assumption violated: " << e.what() << "\n";
        return kExitAssumption;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const SingularityError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "output error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitOk;
}

int cli_main(int argc, char** argv) {
    CLI::App app{"Simulation and stability certification of converter networks under matching control"};
    std::string scenario, config_path, out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<double> t_end;
    app.add_option("scenario", scenario, "steady-state | simulate | linearize | certify | conditions | roa")
        ->required();
    app.add_option("--config", config_path, "YAML configuration file")->required();
    app.add_option("--out", out_dir, "output directory (overrides output.dir)");
    app.add_option("--seed", seed, "seed for random ROA directions");
    app.add_option("--t-end", t_end, "integration horizon in seconds");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    RunConfig cfg;
    try {
        cfg = parse_config(config_path);
        cfg.scenario = parse_scenario(scenario);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed) cfg.seed = *seed;
    if (t_end) {
        if (!(*t_end > 0.0)) {
            std::cerr << "config error: --t-end must be positive\n";
            return kExitConfig;
        }
        if (cfg.scenario == Scenario::Roa)
            cfg.roa.t_end = *t_end;
        else
            cfg.simulate.t_end = *t_end;
    }
    return run(cfg, std::cout, std::cerr);
}

}  // namespace convsync
