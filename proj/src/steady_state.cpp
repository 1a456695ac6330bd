#include "convsync/steady_state.hpp"

#include "convsync/errors.hpp"

#include <cmath>
#include <numbers>

namespace convsync {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Mat checked_inverse(const Mat& a, const char* what) {
    Eigen::PartialPivLU<Mat> lu(a);
    if (a.size() > 0 && !(lu.rcond() > 1e-14))
        throw SingularityError("steady_state", std::string(what) + " is numerically singular");
    return lu.inverse();
}

/// Z_C + B Z_l^{-1} B^T
Mat shunt_matrix(const NetworkSpec& spec, const ImpedanceSet& z) {
    Mat inner = z.z_c;
    if (spec.m() > 0) {
        const Mat b = expanded_incidence(spec);
        inner += b * checked_inverse(z.z_ell, "line impedance") * b.transpose();
    }
    return inner;
}

}  // namespace

Mat admittance(const NetworkSpec& spec) {
    const ImpedanceSet z = impedances(spec);
    const Mat inner = shunt_matrix(spec, z);
    return checked_inverse(z.z_r + checked_inverse(inner, "Z_C + B Z_l^-1 B^T"),
                           "Z_R + (Z_C + B Z_l^-1 B^T)^-1");
}

Vec feasible_input(const Vec& gamma_star, const Mat& y, double xi) {
    const Mat rot = rot_matrix(gamma_star);
    return xi * rot.transpose() * (y * (rot * Vec::Ones(gamma_star.size())));
}

Vec feasible_input(const Vec& gamma_star, const NetworkSpec& spec) {
    const auto& c = spec.converter;
    return feasible_input(gamma_star, admittance(spec), c.mu * c.mu * c.v_dc_star / 4.0);
}

Vec electrical_power(const Vec& u, const NetworkSpec& spec) {
    return spec.converter.v_dc_star * u;
}

SteadyState recover_steady_state(const Vec& gamma_star, const NetworkSpec& spec) {
    spec.validate();
    if (gamma_star.size() != spec.n)
        throw DimensionError("steady_state", "gamma_star must have length n");
    const auto& c = spec.converter;
    const ImpedanceSet z = impedances(spec);
    const Mat inner = shunt_matrix(spec, z);

    SteadyState ss;
    ss.layout = StateLayout(spec);
    ss.gamma_star = gamma_star;
    ss.v_dc_star = c.v_dc_star;
    ss.xi = c.mu * c.mu * c.v_dc_star / 4.0;
    ss.admittance_Y = admittance(spec);

    const Mat rot = rot_matrix(gamma_star);
    const Vec i_star = 0.5 * c.mu * ss.admittance_Y * (rot * Vec::Constant(spec.n, c.v_dc_star));
    const Vec v_star = Eigen::PartialPivLU<Mat>(inner).solve(i_star);
    Vec il_star(2 * spec.m());
    if (spec.m() > 0)
        il_star = Eigen::PartialPivLU<Mat>(z.z_ell).solve(expanded_incidence(spec).transpose() * v_star);

    const StateLayout& L = ss.layout;
    ss.z_star.resize(L.size());
    ss.z_star.segment(L.gamma(), L.n) = gamma_star;
    ss.z_star.segment(L.v_dc(), L.n).setConstant(c.v_dc_star);
    ss.z_star.segment(L.i_f(), 2 * L.n) = i_star;
    ss.z_star.segment(L.v_c(), 2 * L.n) = v_star;
    ss.z_star.segment(L.i_line(), 2 * L.m) = il_star;
    ss.u_star = feasible_input(gamma_star, ss.admittance_Y, ss.xi);
    return ss;
}

Vec orbit_point(const SteadyState& ss, double theta) {
    return apply_symmetry(ss.z_star, theta, ss.layout);
}

double wrap_angle(double a) {
    double r = std::remainder(a, kTwoPi);  // [-pi, pi]
    if (r <= -std::numbers::pi) r += kTwoPi;
    return r;
}

OrbitDistance distance_to_orbit(const Vec& z, const SteadyState& ss, const std::optional<Vec>& weights) {
    const StateLayout& L = ss.layout;
    if (z.size() != L.size()) throw DimensionError("steady_state", "distance_to_orbit: size mismatch");
    if (weights && weights->size() != L.size())
        throw DimensionError("steady_state", "distance_to_orbit: weight vector has wrong length");

    const Vec x_star = ss.x_star();
    auto w = [&](int idx) { return weights ? (*weights)(idx) : 1.0; };

    // Orbit-independent part: DC voltages.
    double dc2 = 0.0;
    for (int k = 0; k < L.n; ++k) {
        const double d = z(L.v_dc() + k) - ss.v_dc_star;
        dc2 += w(L.v_dc() + k) * d * d;
    }
    auto sq_dist = [&](double theta) {
        double s = dc2;
        for (int k = 0; k < L.n; ++k) {
            const double d = wrap_angle(z(L.gamma() + k) - ss.gamma_star(k) - theta);
            s += w(L.gamma() + k) * d * d;
        }
        const double c = std::cos(theta), sn = std::sin(theta);
        for (int j = 0; j < L.ac_size(); j += 2) {
            const double a = x_star(j), b = x_star(j + 1);
            const double dd = z(L.ac() + j) - (c * a - sn * b);
            const double dq = z(L.ac() + j + 1) - (sn * a + c * b);
            s += w(L.ac() + j) * dd * dd + w(L.ac() + j + 1) * dq * dq;
        }
        return s;
    };

    constexpr int kGrid = 64;
    const double h = kTwoPi / kGrid;
    int best = 0;
    double best_val = sq_dist(0.0);
    for (int g = 1; g < kGrid; ++g) {
        const double v = sq_dist(g * h);
        if (v < best_val) {
            best_val = v;
            best = g;
        }
    }

    // Golden-section refinement on the bracket around the best grid node.
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = (best - 1) * h, b = (best + 1) * h;
    double c = b - invphi * (b - a), d = a + invphi * (b - a);
    double fc = sq_dist(c), fd = sq_dist(d);
    while (b - a > 1e-10) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = sq_dist(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = sq_dist(d);
        }
    }
    double theta = 0.5 * (a + b);
    double val = sq_dist(theta);
    if (best_val < val) {
        theta = best * h;
        val = best_val;
    }
    theta = std::fmod(theta, kTwoPi);
    if (theta < 0.0) theta += kTwoPi;
    return {std::sqrt(std::max(val, 0.0)), theta};
}

GammaSolveResult solve_gamma_from_input(const Vec& target, const NetworkSpec& spec,
                                        const GammaSolveOptions& opts) {
    spec.validate();
    const int n = spec.n;
    if (target.size() != n) throw DimensionError("steady_state", "target input must have length n");
    if (opts.pinned < 0 || opts.pinned >= n || opts.slack < 0 || opts.slack >= n)
        throw InvalidSpecError("steady_state", "pinned/slack node index out of range");

    const auto& c = spec.converter;
    const Mat y = admittance(spec);
    const double xi = c.mu * c.mu * c.v_dc_star / 4.0;
    const double scale = std::max(1.0, target.lpNorm<Eigen::Infinity>());

    std::vector<int> free_angles, matched;
    for (int k = 0; k < n; ++k) {
        if (k != opts.pinned) free_angles.push_back(k);
        if (k != opts.slack) matched.push_back(k);
    }
    const int dim = static_cast<int>(free_angles.size());

    auto expand = [&](const Vec& x) {
        Vec g = Vec::Zero(n);
        for (int i = 0; i < dim; ++i) g(free_angles[i]) = x(i);
        return g;
    };
    auto residual = [&](const Vec& x) {
        const Vec u = feasible_input(expand(x), y, xi);
        Vec r(dim);
        for (int i = 0; i < dim; ++i) r(i) = u(matched[i]) - target(matched[i]);
        return r;
    };

    GammaSolveResult out;
    Vec x = Vec::Zero(dim);
    Vec r = residual(x);
    for (int it = 0; it < opts.max_iterations && dim > 0; ++it) {
        if (r.lpNorm<Eigen::Infinity>() <= opts.tol * scale) {
            out.converged = true;
            break;
        }
        Mat jac(dim, dim);
        for (int j = 0; j < dim; ++j) {
            const double step = 1e-6 * (1.0 + std::abs(x(j)));
            Vec xp = x, xm = x;
            xp(j) += step;
            xm(j) -= step;
            jac.col(j) = (residual(xp) - residual(xm)) / (2.0 * step);
        }
        const Vec dx = jac.fullPivLu().solve(-r);
        double lambda = 1.0;
        Vec x_new = x + dx, r_new = residual(x_new);
        while (r_new.norm() >= r.norm() && lambda > 1e-4) {
            lambda *= 0.5;
            x_new = x + lambda * dx;
            r_new = residual(x_new);
        }
        x = x_new;
        r = r_new;
        out.iterations = it + 1;
    }
    if (dim == 0 || r.lpNorm<Eigen::Infinity>() <= opts.tol * scale) out.converged = true;

    out.gamma = expand(x);
    for (int k = 0; k < n; ++k) out.gamma(k) = wrap_angle(out.gamma(k));
    out.input = feasible_input(out.gamma, y, xi);
    out.residual = dim > 0 ? r.lpNorm<Eigen::Infinity>() : 0.0;
    out.slack_mismatch = out.input(opts.slack) - target(opts.slack);
    return out;
}

}  // namespace convsync
