#include "convsync/conditions.hpp"

#include "convsync/errors.hpp"
#include "convsync/matrix_algebra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace convsync {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

}  // namespace

PowerQuantities power_quantities(const SteadyState& ss, const NetworkSpec& spec, int k) {
    if (k < 0 || k >= ss.layout.n) throw DimensionError("conditions", "converter index out of range");
    const double s = 0.5 * ss.v_dc_star * spec.converter.mu;
    const Vec2 r = rotation_vector(ss.gamma_star(k));
    const Vec2 i = ss.i_star().segment<2>(2 * k);
    PowerQuantities pq;
    pq.p_x = s * r.dot(i);
    pq.q_x = s * r.dot(j2().transpose() * i);
    const double apparent = std::hypot(pq.p_x, pq.q_x);
    pq.power_factor = apparent > 0.0 ? pq.p_x / apparent : kNaN;
    return pq;
}

GainAlpha alpha_from_gain(double gain_y, const ConverterParams& c) {
    GainAlpha g;
    g.gain_y = gain_y;
    g.y_feasible = gain_y < 1.0;
    const double v2 = c.v_dc_star * c.v_dc_star;
    g.alpha_r = c.mu * c.mu * v2 / (16.0 * c.r_f);
    if (g.y_feasible) {
        g.alpha_y = c.mu * v2 / (4.0 * std::sqrt(1.0 / (gain_y * gain_y) - 1.0));
        g.alpha = std::max(g.alpha_r, g.alpha_y);
    } else {
        g.alpha_y = kNaN;
        g.alpha = kNaN;
    }
    return g;
}

GainAlpha gain_and_alpha(const LinearizedSystem& lin, const NetworkSpec& spec) {
    const auto& c = spec.converter;
    const double a11_abscissa = spectral_abscissa(lin.A11);
    if (!(a11_abscissa < 0.0))
        throw AssumptionError("conditions", "a11-hurwitz", "A11 is not Hurwitz, F is undefined", a11_abscissa);
    const Mat p1 = solve_lyapunov(lin.A11, Mat::Identity(lin.A11.rows(), lin.A11.cols()));
    const Mat f = lin.A22 + lin.A21 * p1 * lin.A12;
    const double f_abscissa = spectral_abscissa(f);
    if (!(f_abscissa < 0.0))
        throw AssumptionError("conditions", "small-gain", "F is not Hurwitz", f_abscissa);
    return alpha_from_gain(0.5 * c.mu * c.v_dc_star / c.l_f * resolvent_sup(f), c);
}

AcVerdict check_ac(const PowerQuantities& pq, double alpha) {
    AcVerdict v;
    if (!std::isfinite(alpha)) {
        v.margin = v.margin_q_form = kNaN;
        v.cause = "ac power-factor condition undefined: alpha requires gain Y < 1";
        return v;
    }
    const double p = pq.p_x, q = pq.q_x;
    const double lhs = p / std::hypot(p, q);
    const double rhs = std::sqrt(1.0 - alpha * alpha / (p * p + alpha * alpha));
    v.margin = rhs - lhs;
    const bool pf_ok = lhs < rhs;
    v.margin_q_form = q - alpha;
    v.ok_q_form = q > alpha;
    v.forms_agree = pf_ok == v.ok_q_form;

    if (!(p > 0.0))
        v.cause = "ac power-factor condition requires P_x,k > 0, got " + num(p);
    else if (!(q > 0.0))
        v.cause = "ac power-factor condition requires Q_x,k > 0, got " + num(q);
    else if (!pf_ok)
        v.cause = "ac power-factor condition power factor " + num(lhs) + " is not below " + num(rhs) + " (needs Q_x,k > alpha = " +
                  num(alpha) + ")";
    v.ok = v.cause.empty();
    return v;
}

DcVerdict check_dc(const std::vector<double>& q_x, double gain_y, const ConverterParams& c) {
    DcVerdict d;
    d.radicand = d.lhs = d.margin = kNaN;
    const double v = c.v_dc_star;
    if (!(gain_y < 1.0)) {
        d.q_bound = kNaN;
        d.cause = "dc damping condition undefined: gain Y = " + num(gain_y) + " is not below 1";
        return d;
    }
    const double y_term = 1.0 / (gain_y * gain_y) - 1.0;
    d.q_bound = c.mu * v * v / (4.0 * std::sqrt(y_term));
    double num_max = 0.0, den_max = 0.0;
    for (double q : q_x) {
        if (!(q > 0.0)) {
            d.cause = "dc damping condition undefined: Q_x,k = " + num(q) + " is not positive";
            return d;
        }
        const double a = 1.0 + c.eta * c.c_dc * v / q;
        num_max = std::max(num_max, 0.25 * c.mu * c.mu * a * a);
        den_max = std::max(den_max, 0.25 * c.mu * c.mu * v * v / (q * q));
    }
    d.radicand = 4.0 / (v * v) * y_term - den_max;
    if (!(d.radicand > 0.0)) {
        d.cause = "dc damping condition structurally infeasible: radicand " + num(d.radicand) +
                  " is not positive (needs every Q_x,k > " + num(d.q_bound) + ")";
        return d;
    }
    d.feasible = true;
    d.lhs = std::sqrt(num_max / d.radicand);
    d.margin = c.k_p - d.lhs;
    d.ok = d.lhs < c.k_p;
    if (!d.ok) d.cause = "dc damping condition K_p = " + num(c.k_p) + " does not exceed " + num(d.lhs);
    return d;
}

ConditionReport evaluate_conditions(const SteadyState& ss, const LinearizedSystem& lin, const NetworkSpec& spec) {
    ConditionReport r;
    const int n = ss.layout.n;
    std::vector<double> q;
    for (int k = 0; k < n; ++k) {
        r.converters.push_back(power_quantities(ss, spec, k));
        q.push_back(r.converters.back().q_x);
    }
    try {
        r.gain = gain_and_alpha(lin, spec);
    } catch (const AssumptionError& e) {
        r.gain_error = e.what();
        r.gain = alpha_from_gain(std::numeric_limits<double>::infinity(), spec.converter);
        r.gain.gain_y = kNaN;
        r.failures.push_back(e.what());
    }
    if (r.gain_error.empty() && !r.gain.y_feasible)
        r.failures.push_back("gain Y = " + num(r.gain.gain_y) +
                             " is not below 1 (requires ||G_ac||_inf < 2L/(mu v_dc*))");

    for (int k = 0; k < n; ++k) {
        r.ac.push_back(check_ac(r.converters[k], r.gain.alpha));
        if (!r.ac.back().forms_agree) r.forms_disagree = true;
        if (!r.ac.back().ok) r.failures.push_back("converter " + std::to_string(k + 1) + ": " + r.ac.back().cause);
    }
    r.dc = check_dc(q, r.gain.gain_y, spec.converter);
    if (!r.dc.ok) r.failures.push_back(r.dc.cause);

    r.all_satisfied = r.gain.y_feasible && r.dc.ok &&
                      std::all_of(r.ac.begin(), r.ac.end(), [](const AcVerdict& v) { return v.ok; });
    return r;
}

}  // namespace convsync
