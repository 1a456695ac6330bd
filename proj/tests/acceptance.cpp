// Acceptance run on the reference three-converter ring. One PASS/FAIL line per
// criterion, then a summary. Exit status is nonzero if any gating criterion fails.

#include "convsync/certificate.hpp"
#include "convsync/conditions.hpp"
#include "convsync/errors.hpp"
#include "convsync/linearize.hpp"
#include "convsync/matrix_algebra.hpp"
#include "convsync/simulate.hpp"
#include "convsync/steady_state.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace convsync;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
    bool gating = true;
};

struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> body;
};

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

struct Shared {
    NetworkSpec spec = NetworkSpec::table1_ring();
    Network net{spec};
    GammaSolveResult solve = solve_gamma_from_input(Vec::Constant(3, spec.converter.i_dc_star), spec);
    SteadyState ss = recover_steady_state(solve.gamma, spec);
    LinearizedSystem lin = jacobian(ss, spec);
    double all_converge_radius = 0.0;
};

Shared& shared() {
    static Shared s;
    return s;
}

RoaSettings roa_settings() {
    RoaSettings r;
    r.settle.integration.method = Method::Rosenbrock23;
    r.settle.integration.rel_tol = 1e-6;
    r.settle.integration.abs_tol = 1e-8;
    r.settle.integration.t_end = 1000.0;
    r.settle.chunk = 10.0;
    r.settle.window = 0.2;
    return r;
}

Outcome equivariance() {
    const Shared& s = shared();
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> th(-std::numbers::pi, std::numbers::pi);
    const Vec u = s.ss.u_star;
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const Vec z = oracle::random_state(s.spec, rng);
        const double t = th(rng);
        const Vec fz = s.net(z, u);
        const Vec lhs = s.net(apply_symmetry(z, t, s.ss.layout), u);
        const Vec rhs = rotate_ac(fz, t, s.ss.layout);
        worst = std::max(worst, (lhs - rhs).norm() / (1.0 + fz.norm()));
    }
    return {worst <= 1e-10, "max relative defect " + fmt("%.3g", worst) + " (tol 1e-10, 200 samples)"};
}

Outcome steady_state_fidelity() {
    const Shared& s = shared();
    const double bound = 1e-9 * (1.0 + s.ss.z_star.norm());
    double worst = s.net(s.ss.z_star, s.ss.u_star).norm();
    const double at_star = worst;
    for (int k = 0; k < 32; ++k) {
        const double th = 2.0 * std::numbers::pi * k / 32.0;
        worst = std::max(worst, s.net(orbit_point(s.ss, th), s.ss.u_star).norm());
    }
    std::ostringstream d;
    d << "|f(z*)| " << fmt("%.3g", at_star) << ", max over 32 orbit points " << fmt("%.3g", worst) << " (bound "
      << fmt("%.3g", bound) << "); node 1 slack input " << fmt("%.6g", s.ss.u_star(0));
    return {s.solve.converged && worst <= bound, d.str()};
}

Outcome jacobian_correctness() {
    const Shared& s = shared();
    const Mat fd = finite_difference_jacobian(s.net, s.ss.z_star, s.ss.u_star);
    const double err = oracle::entrywise_relative_error(fd, s.lin.jacobian);
    const double jn = Eigen::JacobiSVD<Mat>(s.lin.jacobian).singularValues()(0);
    const Vec& v = s.lin.kernel_vector;
    const double kres = (s.lin.jacobian * v).norm() / (jn * v.norm());
    return {err <= 1e-5 && kres <= 1e-8,
            "entrywise FD error " + fmt("%.3g", err) + " (tol 1e-5), kernel residual " + fmt("%.3g", kres) +
                " x |J||v| (tol 1e-8)"};
}

Outcome two_converter_kernel() {
    const NetworkSpec spec = NetworkSpec::table1_pair();
    const GammaSolveResult g = solve_gamma_from_input(Vec::Constant(2, spec.converter.i_dc_star), spec);
    const LinearizedSystem lin = jacobian(recover_steady_state(g.gamma, spec), spec);
    const Vec head = lin.kernel_vector.normalized().head(4);
    const Vec target = (Vec(4) << 0.043, 0.043, 0.0, 0.0).finished();
    const double err = (head - target).cwiseAbs().maxCoeff();
    std::ostringstream d;
    d << (err <= 5e-3 ? "matched" : "unmatched") << ": normalized (gamma, v_dc) block (" << fmt("%.5g", head(0))
      << ", " << fmt("%.5g", head(1)) << ", " << fmt("%.3g", head(2)) << ", " << fmt("%.3g", head(3))
      << "), max deviation " << fmt("%.3g", err) << " from (0.043, 0.043, 0, 0), tol 5e-3; reported, not gating";
    return {err <= 5e-3, d.str(), false};
}

Outcome eigenvalue_split() {
    const Shared& s = shared();
    const EigenSplit e = eigen_split(s.lin);
    const ConditionReport r = evaluate_conditions(s.ss, s.lin, s.spec);
    std::ostringstream d;
    d << e.zero_modes << " zero, " << e.stable_count << " stable, " << e.unstable_count << " unstable, gap "
      << fmt("%.4g", e.spectral_gap) << " (zero tol " << fmt("%.3g", e.tol_zero) << ")";
    if (!r.all_satisfied) d << "; the parametric conditions do not hold on this instance, split evaluated as is";
    return {e.zero_modes == 1 && e.unstable_count == 0 && e.stable_split(), d.str()};
}

Outcome solver_oracles() {
    std::mt19937_64 rng(606);
    double lyap_worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        const int n = 2 + t % 11;
        const Mat a = oracle::random_hurwitz(n, rng);
        const Mat g = oracle::random_matrix(n, n, rng);
        const Mat q = g * g.transpose();
        const Mat ref = oracle::lyapunov_kronecker(a, q);
        lyap_worst = std::max(lyap_worst, (solve_lyapunov(a, q) - ref).norm() / ref.norm());
    }
    double are_worst = 0.0;
    int are_stable = 0;
    for (int t = 0; t < 20; ++t) {
        const int n = 6;
        const Mat f = oracle::random_hurwitz(n, rng);
        const Mat b = oracle::random_matrix(n, 2, rng);
        Mat c = oracle::random_matrix(3, n, rng);
        const double g = hinf_norm(f, b, c);
        if (g >= 1.0) c *= 0.9 / g;
        const AreSolution s = solve_hinf_are(f, b, c);
        const double scale = std::max(1.0, f.norm() * s.p2.norm() + (b * b.transpose()).norm() * s.p2.squaredNorm() +
                                               (c.transpose() * c).norm());
        are_worst = std::max(are_worst, s.residual / scale);
        if (s.stabilizing()) ++are_stable;
    }
    double hinf_worst = 0.0;
    for (int t = 0; t < 10; ++t) {
        const int n = 2 + t % 5;
        const Mat f = oracle::random_hurwitz(n, rng, 0.05 + 0.1 * (t % 3));
        const Mat b = oracle::random_matrix(n, 1 + t % 2, rng);
        const Mat c = oracle::random_matrix(1 + t % 3, n, rng);
        const double grid = oracle::hinf_grid(f, b, c, 100000);
        hinf_worst = std::max(hinf_worst, std::abs(hinf_norm(f, b, c) - grid) / grid);
    }
    std::ostringstream d;
    d << "Lyapunov vs Kronecker " << fmt("%.3g", lyap_worst) << " (tol 1e-8, 50 sizes 2-12); Riccati relative residual "
      << fmt("%.3g", are_worst) << " (tol 1e-6), stabilizing " << are_stable << "/20; H-inf vs 1e5-point grid "
      << fmt("%.3g", hinf_worst) << " (tol 1%)";
    return {lyap_worst <= 1e-8 && are_worst <= 1e-6 && are_stable == 20 && hinf_worst <= 0.01, d.str()};
}

Outcome certificate_suite() {
    const Shared& s = shared();
    try {
        const Certificate c = build_certificate(s.lin);
        const double res_tol = 1e-6 * c.jacobian.norm() * c.p.norm();
        std::mt19937_64 rng(707);
        int bad = 0;
        for (int i = 0; i < 100; ++i) {
            const Vec x = oracle::random_matrix(static_cast<int>(c.kernel.size()), 1, rng);
            if (!(lyapunov_value(c, x) > 0.0) || !(lyapunov_derivative(c, x) < 0.0)) ++bad;
        }
        std::ostringstream d;
        d << "min eig P " << fmt("%.3g", c.p_min_eigenvalue) << ", residual " << fmt("%.3g", c.lyapunov_residual)
          << " (tol " << fmt("%.3g", res_tol) << "), Q kernel residual " << fmt("%.3g", c.q_kernel_residual)
          << ", sign violations " << bad << "/100";
        return {c.valid() && c.lyapunov_residual <= res_tol && bad == 0, d.str()};
    } catch (const AssumptionError& e) {
        std::ostringstream d;
        d << "no certificate: " << e.what();
        // Same pipeline at equal angles, where the angle block is Hurwitz.
        const SteadyState eq = recover_steady_state(Vec::Zero(3), s.spec);
        try {
            build_certificate(jacobian(eq, s.spec));
            d << "; equal-angle state certifies";
        } catch (const AssumptionError& e2) {
            d << "; equal-angle state: " << e2.what();
        }
        return {false, d.str()};
    }
}

Outcome conditions_consistency() {
    const Shared& s = shared();
    std::mt19937_64 rng(808);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int agree = 0, tried = 0;
    while (tried < 50) {
        NetworkSpec spec = s.spec;
        spec.converter.r_f = 0.05 + 0.5 * u(rng);
        spec.converter.l_f = 1e-4 + 1e-3 * u(rng);
        const Vec g = (Vec(3) << 0.0, 1.5 * (u(rng) - 0.5), 1.5 * (u(rng) - 0.5)).finished();
        const SteadyState ss = recover_steady_state(g, spec);
        for (int k = 0; k < 3 && tried < 50; ++k) {
            const PowerQuantities pq = power_quantities(ss, spec, k);
            if (!(pq.p_x > 0.0 && pq.q_x > 0.0)) continue;
            // scale alpha into the range of Q so both verdicts occur
            const double alpha = pq.q_x * (0.5 + u(rng));
            const AcVerdict v = check_ac(pq, alpha);
            ++tried;
            if (v.forms_agree && v.ok == (pq.q_x > alpha)) ++agree;
        }
    }
    const ConditionReport r = evaluate_conditions(s.ss, s.lin, s.spec);
    const EigenSplit e = eigen_split(s.lin);
    bool margins = r.all_satisfied;
    for (const auto& a : r.ac) margins = margins && a.margin > 0.0;
    margins = margins && r.dc.margin > 0.0;
    std::ostringstream d;
    d << "power-factor vs Q form agree " << agree << "/50; reference ring: ";
    if (r.failures.empty())
        d << "all conditions hold";
    else
        d << r.failures.size() << " failures, first: " << r.failures.front();
    d << "; eigen split " << (e.stable_split() ? "holds" : "fails");
    return {agree == 50 && margins && e.stable_split(), d.str()};
}

Outcome fig4_simulation() {
    const Shared& s = shared();
    Vec z0 = s.ss.z_star;
    z0.head(3) << -6.0, -2.0, -13.15;
    IntegrateOptions o;
    o.t_end = 2.0;
    o.rel_tol = 1e-8;
    o.abs_tol = 1e-10;
    Trajectory t = integrate(s.net, s.ss.u_star, z0, o);
    const double bound = 1e-3 * (1.0 + s.ss.z_star.norm());
    classify(t, s.ss, bound, 0.2);
    const Vec vdc = t.states.back().segment(s.ss.layout.v_dc(), 3);
    const double vdev = ((vdc.array() - s.ss.v_dc_star).abs() / s.ss.v_dc_star).maxCoeff();
    std::ostringstream d;
    d << "at t = 2 s orbit distance " << fmt("%.4g", t.final_orbit_distance) << " (bound " << fmt("%.4g", bound)
      << "), max |v_dc - v_dc*| / v_dc* " << fmt("%.3g", vdev) << " (tol 1e-3)";
    return {t.final_orbit_distance <= bound && vdev <= 1e-3 && !t.diverged, d.str()};
}

std::string fig4_long_horizon() {
    const Shared& s = shared();
    Vec z0 = s.ss.z_star;
    z0.head(3) << -6.0, -2.0, -13.15;
    SettleOptions o = roa_settings().settle;
    o.eps = 1e-3 * (1.0 + s.ss.z_star.norm());
    const SettleResult r = integrate_until_settled(s.net, s.ss.u_star, z0, s.ss, o);
    return std::string(r.converged ? "converged" : "not converged") + " within " + fmt("%.0f", r.t_final) +
           " s, final distance " + fmt("%.3g", r.final_distance);
}

Outcome roa_sweep() {
    Shared& s = shared();
    const auto dirs = roa_directions(3, 20, 1);
    const RoaEstimate e = roa_sample(s.ss, s.spec, dirs, {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0}, roa_settings());
    s.all_converge_radius = e.largest_all_converge_radius;
    int conv = 0, stiff = 0, stalled = 0;
    for (const auto& x : e.samples) {
        conv += x.converged;
        stiff += x.stiff;
        stalled += x.stalled;
    }
    std::ostringstream d;
    d << dirs.size() << " directions x 8 radii: " << conv << "/" << e.samples.size() << " converge, " << stiff
      << " stiff, " << stalled << " stalled; all-converge radius " << fmt("%.2g", e.largest_all_converge_radius)
      << " (need >= 2.5), divergent witnesses " << e.divergent_witnesses.size() << " (need >= 1)";
    return {dirs.size() >= 26 && e.largest_all_converge_radius >= 2.5 && !e.divergent_witnesses.empty(), d.str()};
}

Outcome point_convergence() {
    const Shared& s = shared();
    const double radius = s.all_converge_radius;
    if (!(radius > 0.0)) return {false, "no sampled radius with all samples converging"};
    const auto dirs = roa_directions(3, 20, 11);
    CounterRng rng(12);
    SettleOptions o = roa_settings().settle;
    int ok = 0;
    double worst_drift = 0.0, t_max = 0.0;
    for (int i = 0; i < 20; ++i) {
        const double r = radius * (0.2 + 0.8 * rng.uniform());
        Vec z0 = s.ss.z_star;
        z0.head(3) += r * dirs[6 + i];
        const SettleResult res = integrate_until_settled(s.net, s.ss.u_star, z0, s.ss, o);
        worst_drift = std::max(worst_drift, res.theta_drift);
        t_max = std::max(t_max, res.t_final);
        if (res.converged && res.theta_drift < 1e-4) ++ok;
    }
    std::ostringstream d;
    d << ok << "/20 initial conditions within the sampled all-converge radius " << fmt("%.2g", radius)
      << " (no certificate exists) settle with theta drift < 1e-4 over 0.2 s; worst drift " << fmt("%.3g", worst_drift)
      << ", latest settle " << fmt("%.0f", t_max) << " s";
    return {ok == 20, d.str()};
}

}  // namespace

int main() {
    using clock = std::chrono::steady_clock;
    const std::vector<Criterion> criteria = {
        {1, "equivariance", 1.0, equivariance},
        {2, "steady-state fidelity", 1.0, steady_state_fidelity},
        {3, "Jacobian correctness", 5.0, jacobian_correctness},
        {4, "two-converter kernel", 5.0, two_converter_kernel},
        {5, "eigenvalue split", 1.0, eigenvalue_split},
        {6, "solver oracles", 30.0, solver_oracles},
        {7, "certificate", 5.0, certificate_suite},
        {8, "conditions consistency", 10.0, conditions_consistency},
        {9, "angle-step simulation", 30.0, fig4_simulation},
        {10, "region of attraction", 600.0, roa_sweep},
        {11, "point convergence", 120.0, point_convergence},
    };
    // Steady state, Jacobian and the fixture are built before timing starts.
    (void)shared();

    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = clock::now();
        Outcome o;
        try {
            o = c.body();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(clock::now() - t0).count();
        const bool in_time = secs <= c.limit_s;
        const bool pass = o.pass && in_time;
        std::printf("criterion %2d %-24s %s  %s; runtime %.2f s (limit %.0f s)%s\n", c.id, c.name, pass ? "PASS" : "FAIL",
                    o.detail.c_str(), secs, c.limit_s, in_time ? "" : " OVER TIME");
        if (c.id == 9) std::printf("             long horizon: %s\n", fig4_long_horizon().c_str());
        std::fflush(stdout);
        if (!pass && o.gating) ++failed;
    }
    std::printf("%d gating criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
