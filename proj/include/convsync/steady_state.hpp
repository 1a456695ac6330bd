#pragma once

#include "convsync/network_model.hpp"

#include <optional>

namespace convsync {

/// A synchronous equilibrium together with the input that sustains it.
/// The DC-voltage slot of `z_star` holds v_dc* (absolute voltage).
struct SteadyState {
    StateLayout layout;
    Vec gamma_star;
    Vec z_star;
    Vec u_star;
    double xi = 0.0;  // mu^2 v_dc* / 4
    double v_dc_star = 0.0;
    Mat admittance_Y;

    /// AC part x* = (i*, v*, i_line*) of the equilibrium.
    Vec x_star() const { return z_star.segment(layout.ac(), layout.ac_size()); }
    Vec i_star() const { return z_star.segment(layout.i_f(), 2 * layout.n); }
};

/// Y = (Z_R + (Z_C + B Z_l^{-1} B^T)^{-1})^{-1}. Throws SingularityError
/// when either inverse does not exist.
Mat admittance(const NetworkSpec& spec);

/// u = xi Rot(gamma)^T Y Rot(gamma) 1_n
Vec feasible_input(const Vec& gamma_star, const NetworkSpec& spec);
Vec feasible_input(const Vec& gamma_star, const Mat& admittance_Y, double xi);

/// Electrical power balance P_e* = v_dc* u.
Vec electrical_power(const Vec& u, const NetworkSpec& spec);

SteadyState recover_steady_state(const Vec& gamma_star, const NetworkSpec& spec);

/// (gamma* + theta 1, v_dc* 1, R(theta) x*)
Vec orbit_point(const SteadyState& ss, double theta);

struct OrbitDistance {
    double distance = 0.0;
    double theta_min = 0.0;  // in [0, 2 pi)
};

/// Euclidean distance from z to the steady-state orbit. Angle differences are
/// wrapped to (-pi, pi] per coordinate. `weights`, when given, is a per-slot
/// diagonal weight (length N) applied to the squared components.
OrbitDistance distance_to_orbit(const Vec& z, const SteadyState& ss,
                                const std::optional<Vec>& weights = std::nullopt);

/// Principal value in (-pi, pi].
double wrap_angle(double a);

struct GammaSolveOptions {
    int pinned = 0;         // angle held at zero (gauge)
    int slack = 0;          // node whose input is left free
    double tol = 1e-10;     // on max |u_k - target_k|, scaled by max(1, |target|_inf)
    int max_iterations = 50;
};

struct GammaSolveResult {
    Vec gamma;
    Vec input;              // feasible_input(gamma)
    double residual = 0.0;  // max over non-slack nodes
    double slack_mismatch = 0.0;  // input(slack) - target(slack)
    int iterations = 0;
    bool converged = false;
};

/// Newton inversion of the steady-state map: find angles whose feasible
/// input matches `target` at every node except the slack node. Jacobian by
/// central finite differences, initial guess gamma = 0, backtracking on the
/// residual norm.
GammaSolveResult solve_gamma_from_input(const Vec& target, const NetworkSpec& spec,
                                        const GammaSolveOptions& opts = {});

}  // namespace convsync
