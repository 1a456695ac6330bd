#include "convsync/report.hpp"

#include "convsync/errors.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>

#ifndef CONVSYNC_VERSION
#define CONVSYNC_VERSION "0.0.0"
#endif

namespace convsync {

namespace {

void dump_into(const Json& j, std::string& out, int depth) {
    const std::string pad(2 * (depth + 1), ' '), close_pad(2 * depth, ' ');
    switch (j.type()) {
        case Json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ",\n";
                first = false;
                out += pad + Json(it.key()).dump() + ": ";
                dump_into(it.value(), out, depth + 1);
            }
            out += "\n" + close_pad + "}";
            return;
        }
        case Json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            // Arrays of scalars stay on one line.
            const bool flat = std::none_of(j.begin(), j.end(), [](const Json& e) { return e.is_structured(); });
            if (flat) {
                out += "[";
                for (std::size_t i = 0; i < j.size(); ++i) {
                    if (i) out += ", ";
                    dump_into(j[i], out, depth + 1);
                }
                out += "]";
                return;
            }
            out += "[\n";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out += ",\n";
                out += pad;
                dump_into(j[i], out, depth + 1);
            }
            out += "\n" + close_pad + "]";
            return;
        }
        case Json::value_t::number_float: {
            const double x = j.get<double>();
            out += std::isfinite(x) ? format_double(x) : "null";
            return;
        }
        default:
            out += j.dump();
    }
}

Json finite_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json complex_list(const Eigen::VectorXcd& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(Json::array({v(i).real(), v(i).imag()}));
    return a;
}

}  // namespace

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    std::string s = buf;
    // Keep a float marker so integral values read back as doubles.
    if (std::isfinite(x) && s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

std::string dump_json(const Json& j) {
    std::string out;
    dump_into(j, out, 0);
    out += "\n";
    return out;
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Json metadata(const std::string& config_source, const std::string& scenario) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char ts[32];
    std::strftime(ts, sizeof ts, "%Y-%m-%dT%H:%M:%SZ", &tm);
    Json m;
    m["tool"] = "convsync";
    m["version"] = CONVSYNC_VERSION;
    m["scenario"] = scenario;
    m["config_hash"] = "fnv1a64:" + fnv1a_hex(config_source);
    m["timestamp"] = ts;
    return m;
}

Json to_json(const Vec& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(finite_or_null(v(i)));
    return a;
}

Json to_json(const Mat& m) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vec(m.row(i).transpose())));
    return a;
}

Json to_json(const SteadyState& ss, const NetworkSpec& spec) {
    const StateLayout& L = ss.layout;
    const Network net(spec);
    Json j;
    j["gamma_star"] = to_json(ss.gamma_star);
    j["u_star"] = to_json(ss.u_star);
    j["electrical_power"] = to_json(electrical_power(ss.u_star, spec));
    j["xi"] = ss.xi;
    j["v_dc_star"] = ss.v_dc_star;
    Json z;
    z["gamma"] = to_json(Vec(ss.z_star.segment(L.gamma(), L.n)));
    z["v_dc"] = to_json(Vec(ss.z_star.segment(L.v_dc(), L.n)));
    z["i_f"] = to_json(Vec(ss.z_star.segment(L.i_f(), 2 * L.n)));
    z["v_c"] = to_json(Vec(ss.z_star.segment(L.v_c(), 2 * L.n)));
    z["i_line"] = to_json(Vec(ss.z_star.segment(L.i_line(), 2 * L.m)));
    j["z_star"] = z;
    j["equilibrium_residual"] = net(ss.z_star, ss.u_star).norm();
    j["admittance_Y"] = to_json(ss.admittance_Y);
    return j;
}

Json to_json(const EigenSplit& s) {
    Json j;
    j["zero_modes"] = s.zero_modes;
    j["stable_count"] = s.stable_count;
    j["unstable_count"] = s.unstable_count;
    j["spectral_gap"] = finite_or_null(s.spectral_gap);
    j["tol_zero"] = s.tol_zero;
    j["stable_split"] = s.stable_split();
    j["eigenvalues"] = complex_list(s.eigenvalues);
    return j;
}

Json to_json(const Certificate& c) {
    const Eigen::SelfAdjointEigenSolver<Mat> pe(c.p, Eigen::EigenvaluesOnly);
    const Eigen::SelfAdjointEigenSolver<Mat> qe(c.q_of_p, Eigen::EigenvaluesOnly);
    Json j;
    j["valid"] = c.valid();
    j["p_positive_definite"] = c.p_positive_definite;
    j["q_semidefinite_wrt_kernel"] = c.q_semidefinite_wrt_kernel;
    j["g_norm"] = c.g_norm;
    j["are_stabilizing"] = c.are_stabilizing;
    j["are_origin_residual"] = c.are_origin_residual;
    j["p_min_eigenvalue"] = c.p_min_eigenvalue;
    j["p_max_eigenvalue"] = pe.eigenvalues().maxCoeff();
    j["q_min_eigenvalue"] = c.q_min_eigenvalue;
    j["q_min_eigenvalue_perp"] = c.q_min_eigenvalue_perp;
    j["q_max_eigenvalue"] = qe.eigenvalues().maxCoeff();
    j["q_kernel_residual"] = c.q_kernel_residual;
    j["lyapunov_residual"] = c.lyapunov_residual;
    j["lyapunov_residual_relative"] = c.lyapunov_residual / (c.jacobian.norm() * c.p.norm());
    j["are_residual"] = c.are_residual;
    j["kernel"] = to_json(c.kernel);
    j["p1"] = to_json(c.p1);
    j["p2"] = to_json(c.p2);
    return j;
}

Json to_json(const GammaDiagnostic& d) {
    Json j;
    j["gamma_positive_definite"] = d.gamma_positive_definite;
    j["gamma_min_eigenvalue"] = d.gamma_min_eigenvalue;
    j["pair_residual_relative"] = d.pair_residual;
    j["f_hurwitz"] = d.f_hurwitz;
    return j;
}

Json to_json(const ConditionReport& r) {
    Json j;
    j["all_satisfied"] = r.all_satisfied;
    j["forms_disagree"] = r.forms_disagree;
    Json g;
    g["gain_y"] = finite_or_null(r.gain.gain_y);
    g["y_feasible"] = r.gain.y_feasible;
    g["alpha_r"] = finite_or_null(r.gain.alpha_r);
    g["alpha_y"] = finite_or_null(r.gain.alpha_y);
    g["alpha"] = finite_or_null(r.gain.alpha);
    if (!r.gain_error.empty()) g["error"] = r.gain_error;
    j["gain"] = g;
    Json conv = Json::array();
    for (std::size_t k = 0; k < r.converters.size(); ++k) {
        const auto& pq = r.converters[k];
        const auto& ac = r.ac[k];
        Json c;
        c["node"] = k + 1;
        c["p_x"] = pq.p_x;
        c["q_x"] = pq.q_x;
        c["power_factor"] = finite_or_null(pq.power_factor);
        c["ac_ok"] = ac.ok;
        c["ac_margin"] = finite_or_null(ac.margin);
        c["ac_ok_q_form"] = ac.ok_q_form;
        c["ac_margin_q_form"] = finite_or_null(ac.margin_q_form);
        c["forms_agree"] = ac.forms_agree;
        c["cause"] = ac.cause;
        conv.push_back(c);
    }
    j["converters"] = conv;
    Json dc;
    dc["ok"] = r.dc.ok;
    dc["feasible"] = r.dc.feasible;
    dc["lhs"] = finite_or_null(r.dc.lhs);
    dc["margin"] = finite_or_null(r.dc.margin);
    dc["radicand"] = finite_or_null(r.dc.radicand);
    dc["q_bound"] = finite_or_null(r.dc.q_bound);
    dc["cause"] = r.dc.cause;
    j["dc"] = dc;
    Json f = Json::array();
    for (const auto& s : r.failures) f.push_back(s);
    j["failures"] = f;
    return j;
}

Json to_json(const RoaEstimate& est) {
    Json j;
    j["largest_all_converge_radius"] = est.largest_all_converge_radius;
    j["radii"] = est.radii;
    Json dirs = Json::array();
    for (const Vec& d : est.directions) dirs.push_back(to_json(d));
    j["directions"] = dirs;
    Json w = Json::array();
    for (int idx : est.divergent_witnesses) {
        const RoaSample& s = est.samples[static_cast<std::size_t>(idx)];
        Json e;
        e["direction"] = s.direction;
        e["radius"] = s.radius;
        e["diverged"] = s.diverged;
        e["stalled"] = s.stalled;
        e["stiff"] = s.stiff;
        e["final_distance"] = finite_or_null(s.final_distance);
        w.push_back(e);
    }
    j["divergent_witnesses"] = w;
    j["sample_count"] = est.samples.size();
    return j;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) { write(header); }

std::string CsvWriter::escape(const std::string& f) {
    if (f.find_first_of(",\"\r\n") == std::string::npos) return f;
    std::string out = "\"";
    for (char c : f) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void CsvWriter::write(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ += ',';
        out_ += escape(fields[i]);
    }
    out_ += "\r\n";
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    if (fields.size() != columns_) throw DimensionError("report", "CSV row width differs from header");
    write(fields);
}

void CsvWriter::row(const std::vector<double>& values) {
    std::vector<std::string> f;
    f.reserve(values.size());
    for (double v : values) f.push_back(format_double(v));
    row(f);
}

std::string trajectory_csv(const Trajectory& traj, const StateLayout& layout) {
    std::vector<std::string> header{"t"};
    for (auto& n : state_column_names(layout)) header.push_back(n);
    CsvWriter w(header);
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        std::vector<double> r{traj.times[i]};
        r.insert(r.end(), traj.states[i].data(), traj.states[i].data() + traj.states[i].size());
        w.row(r);
    }
    return w.str();
}

std::string trajectory_abc_csv(const Trajectory& traj, const StateLayout& L, double omega_star) {
    std::vector<std::string> header{"t"};
    for (int k = 0; k < L.n; ++k)
        for (const char* ph : {"a", "b", "c"}) header.push_back("v_" + std::string(ph) + "_" + std::to_string(k + 1));
    CsvWriter w(header);
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        std::vector<double> r{traj.times[i]};
        for (int k = 0; k < L.n; ++k) {
            const Vec2 dq = traj.states[i].segment<2>(L.v_c() + 2 * k);
            const Eigen::Vector3d abc = dq_to_abc(dq, omega_star * traj.times[i]);
            r.insert(r.end(), abc.data(), abc.data() + 3);
        }
        w.row(r);
    }
    return w.str();
}

std::string roa_samples_csv(const RoaEstimate& est) {
    std::vector<std::string> header{"direction", "radius"};
    const int n = est.samples.empty() ? 0 : static_cast<int>(est.samples.front().gamma0.size());
    for (int k = 0; k < n; ++k) header.push_back("gamma0_" + std::to_string(k + 1));
    for (const char* h : {"converged", "diverged", "stalled", "stiff", "final_distance", "limit_theta", "t_final"})
        header.push_back(h);
    CsvWriter w(header);
    for (const RoaSample& s : est.samples) {
        std::vector<std::string> f{std::to_string(s.direction), format_double(s.radius)};
        for (int k = 0; k < n; ++k) f.push_back(format_double(s.gamma0(k)));
        for (bool b : {s.converged, s.diverged, s.stalled, s.stiff}) f.push_back(b ? "1" : "0");
        f.push_back(format_double(s.final_distance));
        f.push_back(format_double(s.limit_theta));
        f.push_back(format_double(s.t_final));
        w.row(f);
    }
    return w.str();
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("report", "cannot write " + path);
    out << contents;
    if (!out) throw Error("report", "write failed for " + path);
}

}  // namespace convsync
