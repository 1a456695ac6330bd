#include "convsync/simulate.hpp"

#include "convsync/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

namespace convsync {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// Continuous extension.
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

std::vector<double> default_grid(const IntegrateOptions& o) {
    std::vector<double> t;
    const int nu = std::max(o.default_samples, 2);
    for (int i = 0; i < nu; ++i) t.push_back(o.t_end * i / (nu - 1));
    const double w = std::min(o.tail_window, o.t_end);
    for (int i = 0; i < o.tail_samples; ++i)
        t.push_back(o.t_end - w + w * i / std::max(o.tail_samples - 1, 1));
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end(), [](double a, double b) { return std::abs(a - b) < 1e-15 * (1 + std::abs(a)); }),
            t.end());
    return t;
}

std::vector<double> checked_samples(const Network& net, const Vec& u, const Vec& z0, const IntegrateOptions& opts) {
    if (!(opts.t_end > 0.0)) throw InvalidSpecError("simulate", "t_end must be positive");
    if (!(opts.rel_tol > 0.0) || !(opts.abs_tol > 0.0)) throw InvalidSpecError("simulate", "tolerances must be positive");
    if (z0.size() != net.layout().size() || u.size() != net.n())
        throw DimensionError("simulate", "initial state or input has wrong length");
    std::vector<double> samples = opts.sample_times.empty() ? default_grid(opts) : opts.sample_times;
    std::sort(samples.begin(), samples.end());
    for (double s : samples)
        if (s < 0.0 || s > opts.t_end) throw InvalidSpecError("simulate", "sample time outside [0, t_end]");
    return samples;
}

double weighted_rms(const Vec& e, const Vec& ya, const Vec& yb, double rtol, double atol) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        const double q = e(i) / (atol + rtol * std::max(std::abs(ya(i)), std::abs(yb(i))));
        s += q * q;
    }
    return std::sqrt(s / static_cast<double>(e.size()));
}

[[noreturn]] void throw_stiff(double h, double t, Trajectory& traj) {
    throw StiffnessError("step size " + std::to_string(h) + " fell below 1e-14 t_end at t = " + std::to_string(t) +
                             " (stiffness)",
                         std::move(traj));
}

/// Records the state and reports divergence past the blow-up radius.
bool check_blowup(Trajectory& traj, double t, const Vec& y, double blowup) {
    if (y.allFinite() && y.norm() <= blowup) return false;
    traj.diverged = true;
    if (traj.times.empty() || traj.times.back() < t) {
        traj.times.push_back(t);
        traj.states.push_back(y);
    }
    return true;
}

Trajectory integrate_dopri(const Network& net, const Vec& u, const Vec& z0, const IntegrateOptions& opts) {
    const std::vector<double> samples = checked_samples(net, u, z0, opts);
    const Eigen::Index dim = net.layout().size();
    Trajectory traj;
    const double blowup = 1e6 * (1.0 + z0.norm());
    const double h_min = 1e-14 * opts.t_end;
    const double rtol = opts.rel_tol, atol = opts.abs_tol;

    Vec y = z0, y_new(dim), k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim), tmp(dim), err(dim);
    Vec r2(dim), r3(dim), r4(dim), r5(dim);
    net.eval(y, u, k1);

    auto err_norm = [&](const Vec& e, const Vec& ya, const Vec& yb) { return weighted_rms(e, ya, yb, rtol, atol); };

    double h = opts.initial_step;
    if (!(h > 0.0)) {
        const Vec sc = (atol + rtol * y.cwiseAbs().array()).matrix();
        const double dn0 = std::sqrt((y.cwiseQuotient(sc)).squaredNorm() / dim);
        const double dn1 = std::sqrt((k1.cwiseQuotient(sc)).squaredNorm() / dim);
        double h0 = (dn0 < 1e-5 || dn1 < 1e-5) ? 1e-6 : 0.01 * dn0 / dn1;
        h0 = std::min(h0, opts.t_end);
        tmp = y + h0 * k1;
        net.eval(tmp, u, k2);
        const double dn2 = std::sqrt(((k2 - k1).cwiseQuotient(sc)).squaredNorm() / dim) / h0;
        const double mx = std::max(dn1, dn2);
        const double h1 = mx <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / mx, 0.2);
        h = std::min(100.0 * h0, h1);
    }

    std::size_t next_sample = 0;
    double t = 0.0;
    while (next_sample < samples.size() && samples[next_sample] <= 0.0) {
        traj.times.push_back(samples[next_sample++]);
        traj.states.push_back(y);
    }

    double err_prev = 1e-4;
    bool last_rejected = false;
    while (t < opts.t_end && next_sample < samples.size()) {
        if (h < h_min) throw_stiff(h, t, traj);
        const bool last = t + h >= opts.t_end;
        if (last) h = opts.t_end - t;

        tmp = y + h * (a21 * k1);
        net.eval(tmp, u, k2);
        tmp = y + h * (a31 * k1 + a32 * k2);
        net.eval(tmp, u, k3);
        tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
        net.eval(tmp, u, k4);
        tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        net.eval(tmp, u, k5);
        tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        net.eval(tmp, u, k6);
        y_new = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        net.eval(y_new, u, k7);
        err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const double en = err_norm(err, y, y_new);

        if (!std::isfinite(en)) {
            ++traj.rejected_steps;
            h *= 0.1;
            last_rejected = true;
            continue;
        }
        if (en <= 1.0) {
            ++traj.accepted_steps;
            const double t_new = last ? opts.t_end : t + h;
            // Dense output on (t, t_new].
            if (next_sample < samples.size() && samples[next_sample] <= t_new) {
                r2 = y_new - y;
                r3 = h * k1 - r2;
                r4 = r2 - h * k7 - r3;
                r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
                while (next_sample < samples.size() && samples[next_sample] <= t_new) {
                    const double ts = samples[next_sample++];
                    const double s = (ts - t) / h, s1 = 1.0 - s;
                    traj.times.push_back(ts);
                    traj.states.push_back(y + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5))));
                }
            }
            t = t_new;
            y = y_new;
            traj.last_step = h;
            k1 = k7;
            if (check_blowup(traj, t, y, blowup)) return traj;
            // PI step-size controller.
            const double e = std::max(en, 1e-10);
            double fac = 0.9 * std::pow(e, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
            fac = std::clamp(fac, 0.2, 10.0);
            if (last_rejected) fac = std::min(fac, 1.0);
            err_prev = e;
            h *= fac;
            last_rejected = false;
        } else {
            ++traj.rejected_steps;
            h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
            last_rejected = true;
        }
    }
    return traj;
}

// Rosenbrock 2(3) of Shampine and Reichelt, autonomous form.
constexpr double ros_d = 1.0 / (2.0 + std::numbers::sqrt2);
constexpr double ros_e32 = 6.0 + std::numbers::sqrt2;

void forward_jacobian(const Network& net, const Vec& u, const Vec& y, const Vec& fy, Mat& jac, Vec& yp, Vec& fp) {
    yp = y;
    for (Eigen::Index j = 0; j < y.size(); ++j) {
        const double dh = 1.5e-8 * std::max(1.0, std::abs(y(j)));
        yp(j) = y(j) + dh;
        net.eval(yp, u, fp);
        jac.col(j) = (fp - fy) / dh;
        yp(j) = y(j);
    }
}

Trajectory integrate_rosenbrock(const Network& net, const Vec& u, const Vec& z0, const IntegrateOptions& opts) {
    const std::vector<double> samples = checked_samples(net, u, z0, opts);
    const Eigen::Index dim = net.layout().size();
    Trajectory traj;
    const double blowup = 1e6 * (1.0 + z0.norm());
    const double h_min = 1e-14 * opts.t_end;
    const double rtol = opts.rel_tol, atol = opts.abs_tol;

    Vec y = z0, y_new(dim), f0(dim), f1(dim), f2(dim), k1(dim), k2(dim), k3(dim), tmp(dim), fp(dim);
    Mat jac(dim, dim), w(dim, dim);
    const Mat id = Mat::Identity(dim, dim);
    net.eval(y, u, f0);

    double h = opts.initial_step;
    if (!(h > 0.0)) {
        const double rate = weighted_rms(f0, y, y, rtol, atol);
        h = rate > 0.0 ? std::min(opts.t_end, 0.8 * std::pow(rtol, 1.0 / 3.0) / rate) : opts.t_end;
        h = std::max(h, 1e-6 * opts.t_end);
    }

    std::size_t next_sample = 0;
    double t = 0.0;
    while (next_sample < samples.size() && samples[next_sample] <= 0.0) {
        traj.times.push_back(samples[next_sample++]);
        traj.states.push_back(y);
    }

    bool need_jac = true;
    bool last_rejected = false;
    while (t < opts.t_end && next_sample < samples.size()) {
        if (h < h_min) throw_stiff(h, t, traj);
        const bool last = t + h >= opts.t_end;
        if (last) h = opts.t_end - t;
        if (need_jac) {
            forward_jacobian(net, u, y, f0, jac, tmp, fp);
            need_jac = false;
        }
        w = id - (h * ros_d) * jac;
        const Eigen::PartialPivLU<Mat> lu(w);
        k1 = lu.solve(f0);
        tmp = y + (0.5 * h) * k1;
        net.eval(tmp, u, f1);
        k2 = lu.solve(Vec(f1 - k1)) + k1;
        y_new = y + h * k2;
        net.eval(y_new, u, f2);
        k3 = lu.solve(Vec(f2 - ros_e32 * (k2 - f1) - 2.0 * (k1 - f0)));
        const double en = weighted_rms((h / 6.0) * (k1 - 2.0 * k2 + k3), y, y_new, rtol, atol);

        if (!std::isfinite(en)) {
            ++traj.rejected_steps;
            h *= 0.1;
            last_rejected = true;
            continue;
        }
        if (en <= 1.0) {
            ++traj.accepted_steps;
            const double t_new = last ? opts.t_end : t + h;
            // Cubic Hermite output on (t, t_new].
            while (next_sample < samples.size() && samples[next_sample] <= t_new) {
                const double ts = samples[next_sample++];
                const double s = (ts - t) / h, s2 = s * s, s3 = s2 * s;
                traj.times.push_back(ts);
                traj.states.push_back((2 * s3 - 3 * s2 + 1) * y + (s3 - 2 * s2 + s) * h * f0 +
                                      (-2 * s3 + 3 * s2) * y_new + (s3 - s2) * h * f2);
            }
            t = t_new;
            y = y_new;
            f0 = f2;
            traj.last_step = h;
            need_jac = true;
            if (check_blowup(traj, t, y, blowup)) return traj;
            double fac = 0.8 * std::pow(std::max(en, 1e-10), -1.0 / 3.0);
            fac = std::clamp(fac, 0.2, 5.0);
            if (last_rejected) fac = std::min(fac, 1.0);
            h *= fac;
            last_rejected = false;
        } else {
            ++traj.rejected_steps;
            h *= std::max(0.2, 0.8 * std::pow(en, -1.0 / 3.0));
            last_rejected = true;
        }
    }
    return traj;
}

}  // namespace

Trajectory integrate(const Network& net, const Vec& u, const Vec& z0, const IntegrateOptions& opts) {
    return opts.method == Method::Rosenbrock23 ? integrate_rosenbrock(net, u, z0, opts)
                                               : integrate_dopri(net, u, z0, opts);
}

double default_orbit_eps(const SteadyState& ss) { return 1e-4 * (1.0 + ss.z_star.norm()); }

ConvergenceCheck converges_to_orbit(const Trajectory& traj, const SteadyState& ss, double eps, double window,
                                    double theta_tol, const std::optional<Vec>& weights) {
    ConvergenceCheck c;
    if (traj.times.empty()) return c;
    const double t_last = traj.times.back();
    const OrbitDistance last = distance_to_orbit(traj.states.back(), ss, weights);
    c.final_distance = last.distance;
    c.limit_theta = last.theta_min;
    if (traj.diverged) return c;

    int in_window = 0;
    double lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        if (traj.times[i] < t_last - window - 1e-12) continue;
        const OrbitDistance d = distance_to_orbit(traj.states[i], ss, weights);
        c.max_distance_in_window = std::max(c.max_distance_in_window, d.distance);
        // angle offset relative to the final one, wrapped
        const double rel = wrap_angle(d.theta_min - last.theta_min);
        lo = in_window ? std::min(lo, rel) : rel;
        hi = in_window ? std::max(hi, rel) : rel;
        ++in_window;
    }
    c.theta_drift = hi - lo;
    c.converged = in_window >= 2 && c.max_distance_in_window < eps && c.theta_drift < theta_tol;
    return c;
}

void classify(Trajectory& traj, const SteadyState& ss, double eps, double window) {
    const ConvergenceCheck c = converges_to_orbit(traj, ss, eps, window);
    traj.converged = c.converged;
    traj.final_orbit_distance = c.final_distance;
    traj.limit_theta = c.limit_theta;
}

SettleResult integrate_until_settled(const Network& net, const Vec& u, const Vec& z0, const SteadyState& ss,
                                     const SettleOptions& opts) {
    if (!(opts.chunk > opts.window)) throw InvalidSpecError("simulate", "chunk must exceed the convergence window");
    const double eps = opts.eps > 0.0 ? opts.eps : default_orbit_eps(ss);
    const double horizon = opts.integration.t_end;
    SettleResult out;
    Vec z = z0;
    double h = opts.integration.initial_step;
    double prev_distance = distance_to_orbit(z0, ss, opts.weights).distance;
    while (out.t_final < horizon - 1e-12 * horizon) {
        IntegrateOptions io = opts.integration;
        io.t_end = std::min(opts.chunk, horizon - out.t_final);
        io.sample_times.clear();
        io.default_samples = 11;
        io.tail_window = std::min(opts.window, io.t_end);
        io.initial_step = h;
        out.last_chunk = integrate(net, u, z, io);
        const Trajectory& tr = out.last_chunk;
        out.t_final += tr.times.back();
        z = tr.states.back();
        h = tr.last_step;
        const ConvergenceCheck c = converges_to_orbit(tr, ss, eps, opts.window, 1e-4, opts.weights);
        out.final_distance = c.final_distance;
        out.limit_theta = c.limit_theta;
        out.theta_drift = c.theta_drift;
        if (tr.diverged) {
            out.diverged = true;
            break;
        }
        if (c.converged) {
            out.converged = true;
            break;
        }
        if (c.final_distance > eps && std::abs(c.final_distance - prev_distance) < 1e-9 * prev_distance) {
            out.stalled = true;
            break;
        }
        prev_distance = c.final_distance;
    }
    out.last_chunk.converged = out.converged;
    out.last_chunk.final_orbit_distance = out.final_distance;
    out.last_chunk.limit_theta = out.limit_theta;
    return out;
}

std::uint64_t CounterRng::at(std::uint64_t counter) const {
    std::uint64_t z = seed_ + (counter + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double CounterRng::normal() {
    // Box-Muller on two consecutive draws; u1 in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<Vec> roa_directions(int n, int random_count, std::uint64_t seed) {
    if (n < 1) throw InvalidSpecError("simulate", "need at least one node");
    std::vector<Vec> dirs;
    for (int k = 0; k < n; ++k)
        for (double s : {1.0, -1.0}) {
            Vec d = Vec::Zero(n);
            d(k) = s;
            dirs.push_back(d);
        }
    if (n < 2) return dirs;
    CounterRng rng(seed);
    for (int i = 0; i < random_count; ++i) {
        Vec d(n);
        double nrm = 0.0;
        do {
            for (int k = 0; k < n; ++k) d(k) = rng.normal();
            d.array() -= d.mean();
            nrm = d.norm();
        } while (nrm < 1e-12);
        dirs.push_back(d / nrm);
    }
    return dirs;
}

RoaEstimate roa_sample(const SteadyState& ss, const NetworkSpec& spec, const std::vector<Vec>& directions,
                       std::vector<double> radii, const RoaSettings& settings) {
    const Network net(spec);
    const StateLayout& L = ss.layout;
    for (const Vec& d : directions)
        if (d.size() != L.n) throw DimensionError("simulate", "direction must live in the angle subspace (length n)");
    std::sort(radii.begin(), radii.end());
    radii.erase(std::unique(radii.begin(), radii.end()), radii.end());

    RoaEstimate est;
    est.directions = directions;
    est.radii = radii;
    const std::size_t nd = directions.size();
    est.samples.resize(radii.size() * nd);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t idx = next++; idx < est.samples.size(); idx = next++) {
            RoaSample& s = est.samples[idx];
            s.radius = radii[idx / nd];
            s.direction = static_cast<int>(idx % nd);
            Vec z0 = ss.z_star;
            s.gamma0 = ss.gamma_star + s.radius * directions[s.direction];
            z0.segment(L.gamma(), L.n) = s.gamma0;
            try {
                const SettleResult r = integrate_until_settled(net, ss.u_star, z0, ss, settings.settle);
                s.converged = r.converged;
                s.diverged = r.diverged;
                s.stalled = r.stalled;
                s.final_distance = r.final_distance;
                s.limit_theta = r.limit_theta;
                s.t_final = r.t_final;
            } catch (const StiffnessError&) {
                s.stiff = true;
                s.final_distance = std::numeric_limits<double>::infinity();
            }
        }
    };
    int threads = settings.threads > 0 ? settings.threads : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(est.samples.size(), 1)));
    std::vector<std::thread> pool;
    for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    est.largest_all_converge_radius = 0.0;
    bool intact = true;
    for (std::size_t r = 0; r < radii.size(); ++r) {
        bool all = true;
        for (std::size_t d = 0; d < nd; ++d) {
            const std::size_t idx = r * nd + d;
            if (!est.samples[idx].converged) {
                all = false;
                est.divergent_witnesses.push_back(static_cast<int>(idx));
            }
        }
        if (intact && all)
            est.largest_all_converge_radius = radii[r];
        else
            intact = false;
    }
    return est;
}

Eigen::Vector3d dq_to_abc(const Vec2& dq, double theta) {
    constexpr double shift = 2.0 * std::numbers::pi / 3.0;
    Eigen::Vector3d abc;
    for (int p = 0; p < 3; ++p) {
        const double th = theta - p * shift;
        abc(p) = dq(0) * std::cos(th) - dq(1) * std::sin(th);
    }
    return abc;
}

Vec2 abc_to_dq(const Eigen::Vector3d& abc, double theta) {
    constexpr double shift = 2.0 * std::numbers::pi / 3.0;
    Vec2 dq = Vec2::Zero();
    for (int p = 0; p < 3; ++p) {
        const double th = theta - p * shift;
        dq(0) += abc(p) * std::cos(th);
        dq(1) -= abc(p) * std::sin(th);
    }
    return dq * (2.0 / 3.0);
}

std::vector<Eigen::Vector3d> dq_to_abc(const std::vector<Vec2>& dq, double omega_star, const std::vector<double>& times) {
    if (dq.size() != times.size()) throw DimensionError("simulate", "dq_to_abc: signal and time lengths differ");
    std::vector<Eigen::Vector3d> out;
    out.reserve(dq.size());
    for (std::size_t i = 0; i < dq.size(); ++i) out.push_back(dq_to_abc(dq[i], omega_star * times[i]));
    return out;
}

std::vector<std::string> state_column_names(const StateLayout& L) {
    std::vector<std::string> names;
    auto idx = [](int k) { return std::to_string(k + 1); };
    for (int k = 0; k < L.n; ++k) names.push_back("gamma_" + idx(k));
    for (int k = 0; k < L.n; ++k) names.push_back("v_dc_" + idx(k));
    for (int k = 0; k < L.n; ++k) {
        names.push_back("i_d_" + idx(k));
        names.push_back("i_q_" + idx(k));
    }
    for (int k = 0; k < L.n; ++k) {
        names.push_back("v_d_" + idx(k));
        names.push_back("v_q_" + idx(k));
    }
    for (int e = 0; e < L.m; ++e) {
        names.push_back("il_d_" + idx(e));
        names.push_back("il_q_" + idx(e));
    }
    return names;
}

}  // namespace convsync
