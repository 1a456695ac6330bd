#include "convsync/network_model.hpp"

#include "convsync/errors.hpp"

#include <cmath>
#include <string>

namespace convsync {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw InvalidSpecError("network_model", what);
}

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

void ConverterParams::validate() const {
    require(std::isfinite(mu) && mu > 0.0 && mu < 1.0, "mu must lie in (0,1)");
    require(finite_positive(eta), "eta must be positive");
    require(finite_positive(c_dc), "c_dc must be positive");
    require(finite_positive(g_dc), "g_dc must be positive");
    require(std::isfinite(k_p) && k_p >= g_dc, "k_p must satisfy k_p >= g_dc > 0");
    require(finite_positive(l_f), "l_f must be positive");
    require(finite_positive(r_f), "r_f must be positive");
    require(finite_positive(c_f), "c_f must be positive");
    require(finite_positive(g_load), "g_load must be positive");
    require(finite_positive(omega_star), "omega_star must be positive");
    require(std::isfinite(v_dc_star) && v_dc_star >= 1.0, "v_dc_star must be >= 1");
    require(std::isfinite(i_dc_star), "i_dc_star must be finite");
}

void LineParams::validate() const {
    require(finite_positive(r_line), "r_line must be positive");
    require(finite_positive(l_line), "l_line must be positive");
}

void NetworkSpec::validate() const {
    require(n >= 1, "n must be at least 1");
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto& [i, j] = edges[e];
        require(i >= 0 && i < n && j >= 0 && j < n,
                "edge " + std::to_string(e) + " references a node outside [0, n)");
        require(i != j, "edge " + std::to_string(e) + " is a self-loop");
    }
    converter.validate();
    line.validate();
}

NetworkSpec NetworkSpec::table1_ring() {
    NetworkSpec s;
    s.n = 3;
    s.edges = {{0, 1}, {1, 2}, {2, 0}};
    return s;
}

NetworkSpec NetworkSpec::table1_pair() {
    NetworkSpec s;
    s.n = 2;
    s.edges = {{0, 1}};
    return s;
}

Vec SystemState::pack() const {
    const StateLayout L(static_cast<int>(gamma.size()), static_cast<int>(i_line.size() / 2));
    if (v_dc.size() != L.n || i_f.size() != 2 * L.n || v_c.size() != 2 * L.n ||
        i_line.size() % 2 != 0)
        throw DimensionError("network_model", "inconsistent SystemState component sizes");
    Vec z(L.size());
    z.segment(L.gamma(), L.n) = gamma;
    z.segment(L.v_dc(), L.n) = v_dc;
    z.segment(L.i_f(), 2 * L.n) = i_f;
    z.segment(L.v_c(), 2 * L.n) = v_c;
    z.segment(L.i_line(), 2 * L.m) = i_line;
    return z;
}

SystemState SystemState::unpack(const Vec& z, const StateLayout& L) {
    if (z.size() != L.size())
        throw DimensionError("network_model", "packed state has length " +
                                                  std::to_string(z.size()) + ", expected " +
                                                  std::to_string(L.size()));
    SystemState s;
    s.gamma = z.segment(L.gamma(), L.n);
    s.v_dc = z.segment(L.v_dc(), L.n);
    s.i_f = z.segment(L.i_f(), 2 * L.n);
    s.v_c = z.segment(L.v_c(), 2 * L.n);
    s.i_line = z.segment(L.i_line(), 2 * L.m);
    return s;
}

Vec2 rotation_vector(double gamma) { return Vec2(-std::sin(gamma), std::cos(gamma)); }

Mat2 planar_rotation(double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    Mat2 r;
    r << c, -s, s, c;
    return r;
}

Mat2 j2() {
    Mat2 j;
    j << 0.0, -1.0, 1.0, 0.0;
    return j;
}

namespace {

Mat block_diag_repeat(int k, const Mat2& block) {
    Mat out = Mat::Zero(2 * k, 2 * k);
    for (int b = 0; b < k; ++b) out.block<2, 2>(2 * b, 2 * b) = block;
    return out;
}

}  // namespace

Mat j_matrix(int k) { return block_diag_repeat(k, j2()); }

Mat block_rotation(int k, double theta) { return block_diag_repeat(k, planar_rotation(theta)); }

Mat rot_matrix(const Vec& gamma) {
    const int n = static_cast<int>(gamma.size());
    Mat r = Mat::Zero(2 * n, n);
    for (int k = 0; k < n; ++k) r.block<2, 1>(2 * k, k) = rotation_vector(gamma(k));
    return r;
}

Mat build_incidence(const NetworkSpec& spec) {
    if (spec.n < 1) throw InvalidSpecError("network_model", "n must be at least 1");
    Mat b = Mat::Zero(spec.n, spec.m());
    for (int e = 0; e < spec.m(); ++e) {
        const auto& [i, j] = spec.edges[static_cast<std::size_t>(e)];
        if (i < 0 || i >= spec.n || j < 0 || j >= spec.n || i == j)
            throw InvalidSpecError("network_model",
                                   "edge " + std::to_string(e) + " is not a valid node pair");
        b(i, e) = 1.0;
        b(j, e) = -1.0;
    }
    return b;
}

Mat expanded_incidence(const NetworkSpec& spec) {
    const Mat b = build_incidence(spec);
    Mat out = Mat::Zero(2 * b.rows(), 2 * b.cols());
    for (Eigen::Index i = 0; i < b.rows(); ++i)
        for (Eigen::Index e = 0; e < b.cols(); ++e)
            out.block<2, 2>(2 * i, 2 * e) = b(i, e) * Mat2::Identity();
    return out;
}

ImpedanceSet impedances(const NetworkSpec& spec) {
    const auto& c = spec.converter;
    const auto& l = spec.line;
    const double w = c.omega_star;
    ImpedanceSet z;
    z.z_r = c.r_f * Mat::Identity(2 * spec.n, 2 * spec.n) + c.l_f * w * j_matrix(spec.n);
    z.z_c = c.g_load * Mat::Identity(2 * spec.n, 2 * spec.n) + c.c_f * w * j_matrix(spec.n);
    z.z_ell = l.r_line * Mat::Identity(2 * spec.m(), 2 * spec.m()) + l.l_line * w * j_matrix(spec.m());
    return z;
}

Vec rotate_ac(const Vec& z, double theta, const StateLayout& L) {
    if (z.size() != L.size()) throw DimensionError("network_model", "rotate_ac: size mismatch");
    Vec out = z;
    const Mat2 r = planar_rotation(theta);
    for (int k = L.ac(); k < L.size(); k += 2) out.segment<2>(k) = r * z.segment<2>(k);
    return out;
}

Vec apply_symmetry(const Vec& z, double theta, const StateLayout& L) {
    Vec out = rotate_ac(z, theta, L);
    out.segment(L.gamma(), L.n).array() += theta;
    return out;
}

SystemState apply_symmetry(const SystemState& s, double theta) {
    const StateLayout L(static_cast<int>(s.gamma.size()), static_cast<int>(s.i_line.size() / 2));
    return SystemState::unpack(apply_symmetry(s.pack(), theta, L), L);
}

Network::Network(NetworkSpec spec) : spec_(std::move(spec)), layout_(spec_) { spec_.validate(); }

Vec Network::operator()(const Vec& z, const Vec& u) const {
    Vec dz(layout_.size());
    eval(z, u, dz);
    return dz;
}

void Network::eval(const Vec& z, const Vec& u, Vec& dz) const {
    const StateLayout& L = layout_;
    if (z.size() != L.size() || u.size() != L.n)
        throw DimensionError("network_model", "vector_field: state or input has wrong length");
    dz.resize(L.size());

    const auto& c = spec_.converter;
    const auto& ln = spec_.line;
    const double w = c.omega_star;
    const double half_mu = 0.5 * c.mu;
    const double xr = c.l_f * w, xc = c.c_f * w, xl = ln.l_line * w;

    for (int k = 0; k < L.n; ++k) {
        const double gk = z(L.gamma() + k);
        const double vdc = z(L.v_dc() + k);
        const double s = std::sin(gk), co = std::cos(gk);
        const int ik = L.i_f() + 2 * k, vk = L.v_c() + 2 * k;
        const double id = z(ik), iq = z(ik + 1);
        const double vd = z(vk), vq = z(vk + 1);
        const double dv = vdc - c.v_dc_star;

        dz(L.gamma() + k) = c.eta * dv;
        // r(gamma)^T i = -sin * i_d + cos * i_q
        dz(L.v_dc() + k) = (-c.k_p * dv - half_mu * (-s * id + co * iq) + u(k)) / c.c_dc;
        // Z_R i = [R i_d - X i_q, X i_d + R i_q]
        dz(ik) = (-(c.r_f * id - xr * iq) + half_mu * (-s) * vdc - vd) / c.l_f;
        dz(ik + 1) = (-(xr * id + c.r_f * iq) + half_mu * co * vdc - vq) / c.l_f;
        dz(vk) = (-(c.g_load * vd - xc * vq) + id) / c.c_f;
        dz(vk + 1) = (-(xc * vd + c.g_load * vq) + iq) / c.c_f;
    }
    for (int e = 0; e < L.m; ++e) {
        const auto& [from, to] = spec_.edges[static_cast<std::size_t>(e)];
        const int le = L.i_line() + 2 * e;
        const double ld = z(le), lq = z(le + 1);
        const int vf = L.v_c() + 2 * from, vt = L.v_c() + 2 * to;
        // B i_l leaves the tail node and enters the head node.
        dz(vf) -= ld / c.c_f;
        dz(vf + 1) -= lq / c.c_f;
        dz(vt) += ld / c.c_f;
        dz(vt + 1) += lq / c.c_f;
        const double bd = z(vf) - z(vt), bq = z(vf + 1) - z(vt + 1);
        dz(le) = (-(ln.r_line * ld - xl * lq) + bd) / ln.l_line;
        dz(le + 1) = (-(xl * ld + ln.r_line * lq) + bq) / ln.l_line;
    }
}

Vec vector_field(const Network& net, const Vec& z, const Vec& u) { return net(z, u); }

SystemState vector_field(const Network& net, const SystemState& s, const Vec& u) {
    return SystemState::unpack(net(s.pack(), u), net.layout());
}

}  // namespace convsync
