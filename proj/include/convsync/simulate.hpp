#pragma once

// Time integration of the nonlinear network, convergence to the steady-state
// orbit, and sampled region-of-attraction estimates.

#include "convsync/errors.hpp"
#include "convsync/steady_state.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace convsync {

enum class Method {
    Dopri5,       // explicit Dormand-Prince 5(4)
    Rosenbrock23  // linearly implicit, L-stable; for long horizons near the orbit
};

struct IntegrateOptions {
    Method method = Method::Dopri5;
    double t_end = 2.0;
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    /// Output times in [0, t_end]. When empty a default grid is used:
    /// `default_samples` uniform points plus `tail_samples` points over the
    /// trailing `tail_window` seconds.
    std::vector<double> sample_times;
    int default_samples = 1001;
    int tail_samples = 41;
    double tail_window = 0.2;
    double initial_step = 0.0;  // 0 selects automatically
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    long accepted_steps = 0;
    long rejected_steps = 0;
    bool diverged = false;  // |z| exceeded 1e6 (1 + |z0|); integration stopped
    double final_orbit_distance = 0.0;
    bool converged = false;
    double limit_theta = 0.0;
    double last_step = 0.0;  // accepted step size at the end, for restarts
};

/// Step size fell below 1e-14 t_end. Carries the trajectory up to that point.
class StiffnessError : public NumericalError {
public:
    StiffnessError(const std::string& what, Trajectory partial)
        : NumericalError("simulate", what), partial_(std::make_shared<Trajectory>(std::move(partial))) {}
    const Trajectory& partial() const { return *partial_; }

private:
    std::shared_ptr<const Trajectory> partial_;
};

/// Dormand-Prince 5(4) with step-size control and the standard fourth-order
/// continuous extension for output at the sample times, or the
/// Shampine-Reichelt Rosenbrock 2(3) pair with cubic Hermite output.
Trajectory integrate(const Network& net, const Vec& u, const Vec& z0, const IntegrateOptions& opts = {});

struct ConvergenceCheck {
    bool converged = false;
    double limit_theta = 0.0;
    double final_distance = 0.0;
    double max_distance_in_window = 0.0;
    double theta_drift = 0.0;  // max - min of theta_min over the window
};

/// Converged iff the orbit distance stays below eps over the trailing window
/// and the closest orbit angle drifts by less than `theta_tol` there.
/// Optional `weights` (length N) scale each state coordinate in the distance.
ConvergenceCheck converges_to_orbit(const Trajectory& traj, const SteadyState& ss, double eps, double window = 0.2,
                                     double theta_tol = 1e-4, const std::optional<Vec>& weights = std::nullopt);
/// Default tolerance 1e-4 (1 + |z*|).
double default_orbit_eps(const SteadyState& ss);

/// Fills the convergence fields of `traj`.
void classify(Trajectory& traj, const SteadyState& ss, double eps, double window = 0.2);

/// Counter-based generator: value i of stream `seed` is splitmix64(seed + i * golden).
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}
    std::uint64_t at(std::uint64_t counter) const;
    std::uint64_t next() { return at(counter_++); }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }  // [0, 1)
    double normal();

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

/// Angle-space directions: +-e_k for every node, then `random_count` unit
/// vectors orthogonal to 1_n drawn from CounterRng(seed).
std::vector<Vec> roa_directions(int n, int random_count, std::uint64_t seed);

struct SettleOptions {
    IntegrateOptions integration;  // t_end is the overall horizon
    double chunk = 10.0;           // seconds per integration segment
    double eps = -1.0;             // negative selects default_orbit_eps
    double window = 0.2;
    std::optional<Vec> weights;
};

struct SettleResult {
    Trajectory last_chunk;  // times relative to the chunk start
    double t_final = 0.0;   // absolute time at which integration stopped
    bool converged = false;
    bool diverged = false;
    bool stalled = false;   // settled away from the orbit
    double final_distance = 0.0;
    double limit_theta = 0.0;
    double theta_drift = 0.0;
};

/// Integrates in segments of `chunk` seconds and stops as soon as the
/// trajectory has converged to the orbit, diverged, or stalled at a
/// distance above eps (orbit distance changing by less than 1e-9 relative
/// over a segment). Throws StiffnessError like `integrate`.
SettleResult integrate_until_settled(const Network& net, const Vec& u, const Vec& z0, const SteadyState& ss,
                                     const SettleOptions& opts);

struct RoaSettings {
    SettleOptions settle;
    int threads = 0;  // 0 selects hardware concurrency
};

struct RoaSample {
    int direction = 0;
    double radius = 0.0;
    Vec gamma0;
    bool converged = false;
    bool diverged = false;
    bool stiff = false;
    bool stalled = false;
    double final_distance = 0.0;
    double limit_theta = 0.0;
    double t_final = 0.0;
};

struct RoaEstimate {
    std::vector<Vec> directions;
    std::vector<double> radii;
    std::vector<RoaSample> samples;  // ordered by (radius, direction)
    double largest_all_converge_radius = 0.0;
    std::vector<int> divergent_witnesses;  // indices into samples
};

/// z0 = z* + r d on the angle slots only. Radii are sorted; the all-converge
/// radius is the largest tested radius up to which every sample converged.
RoaEstimate roa_sample(const SteadyState& ss, const NetworkSpec& spec, const std::vector<Vec>& directions,
                       std::vector<double> radii, const RoaSettings& settings = {});

/// Amplitude-invariant transform with theta_dq = omega* t:
///   x_a = d cos(theta) - q sin(theta), x_b, x_c shifted by -+2 pi / 3.
Eigen::Vector3d dq_to_abc(const Vec2& dq, double theta);
Vec2 abc_to_dq(const Eigen::Vector3d& abc, double theta);
std::vector<Eigen::Vector3d> dq_to_abc(const std::vector<Vec2>& dq, double omega_star, const std::vector<double>& times);

/// Column names of the trajectory CSV in state order.
std::vector<std::string> state_column_names(const StateLayout& layout);

}  // namespace convsync
