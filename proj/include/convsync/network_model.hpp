#pragma once

// Closed-loop model of n identical DC/AC converters under matching control,
// interconnected by m identical RL lines, written in a dq frame rotating at
// the nominal frequency.
//
// State ordering (frozen):  z = (gamma[n], v_dc[n], i_f[2n], v_c[2n], i_line[2m])
// AC signals are stored as consecutive (d, q) pairs per node / per line.
// Node indices are 0-based inside the library; configuration files use 1-based.

#include <Eigen/Dense>

#include <utility>
#include <vector>

namespace convsync {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;

struct ConverterParams {
    double mu = 0.33;           // modulation amplitude, (0,1)
    double eta = 3.142e-4;      // matching gain
    double k_p = 0.099;         // lumped DC damping, G_dc + K^_p
    double c_dc = 1e-3;
    double g_dc = 1e-5;
    double l_f = 5e-4;          // filter inductance
    double r_f = 0.2;           // filter resistance
    double c_f = 1e-5;          // output capacitance
    double g_load = 0.1;        // load conductance
    double v_dc_star = 1000.0;
    double i_dc_star = 16.5;
    double omega_star = 2.0 * 3.14159265358979323846 * 50.0;

    /// Throws InvalidSpecError naming the first violated constraint.
    void validate() const;
};

struct LineParams {
    double r_line = 0.2;
    double l_line = 5e-5;

    void validate() const;
};

struct Edge {
    int from = 0;
    int to = 0;
    bool operator==(const Edge&) const = default;
};

struct NetworkSpec {
    int n = 1;
    std::vector<Edge> edges;
    ConverterParams converter;
    LineParams line;

    int m() const { return static_cast<int>(edges.size()); }
    void validate() const;

    /// Converter and line values of the three-converter ring used throughout
    /// the examples: edges (0,1), (1,2), (2,0).
    static NetworkSpec table1_ring();
    /// Same parameters, two converters joined by one line.
    static NetworkSpec table1_pair();
};

/// Slot offsets into the packed state vector. Every module addresses the
/// state through this type, never through literal offsets.
struct StateLayout {
    int n = 0;
    int m = 0;

    StateLayout() = default;
    StateLayout(int nodes, int lines) : n(nodes), m(lines) {}
    explicit StateLayout(const NetworkSpec& spec) : n(spec.n), m(spec.m()) {}

    int size() const { return 6 * n + 2 * m; }
    int gamma() const { return 0; }
    int v_dc() const { return n; }
    int i_f() const { return 2 * n; }
    int v_c() const { return 4 * n; }
    int i_line() const { return 6 * n; }
    /// First AC slot; AC block is (i_f, v_c, i_line) of length 4n + 2m.
    int ac() const { return 2 * n; }
    int ac_size() const { return 4 * n + 2 * m; }
};

struct SystemState {
    Vec gamma;
    Vec v_dc;
    Vec i_f;
    Vec v_c;
    Vec i_line;

    Vec pack() const;
    static SystemState unpack(const Vec& z, const StateLayout& layout);
    bool operator==(const SystemState&) const = default;
};

struct ImpedanceSet {
    Mat z_r;    // 2n x 2n, R I + L w J
    Mat z_c;    // 2n x 2n, G I + C w J
    Mat z_ell;  // 2m x 2m, R_l I + L_l w J
};

// ---- small linear-algebra building blocks -------------------------------

/// r(gamma) = [-sin gamma, cos gamma]^T
Vec2 rotation_vector(double gamma);
/// Planar rotation R(theta).
Mat2 planar_rotation(double theta);
/// J_2 = [[0,-1],[1,0]].
Mat2 j2();
/// I_k (x) J_2
Mat j_matrix(int k);
/// I_k (x) R(theta)
Mat block_rotation(int k, double theta);
/// Rot(gamma) = blockdiag(r(gamma_1), ..., r(gamma_n)), 2n x n.
Mat rot_matrix(const Vec& gamma);

/// Node-by-edge incidence matrix: +1 at the tail, -1 at the head.
Mat build_incidence(const NetworkSpec& spec);
/// incidence (x) I_2
Mat expanded_incidence(const NetworkSpec& spec);
ImpedanceSet impedances(const NetworkSpec& spec);

/// Rotate every AC (d,q) pair of a packed vector by R(theta); angle and DC
/// slots are left untouched. This is the linear part S(theta) of the symmetry.
Vec rotate_ac(const Vec& z, double theta, const StateLayout& layout);

/// (gamma + theta 1, v_dc, R(theta) x)
Vec apply_symmetry(const Vec& z, double theta, const StateLayout& layout);
SystemState apply_symmetry(const SystemState& s, double theta);

/// Immutable evaluator of the closed-loop vector field. Holds the network
/// data in the flat form needed by the per-node loops of `operator()`.
class Network {
public:
    explicit Network(NetworkSpec spec);

    const NetworkSpec& spec() const { return spec_; }
    const StateLayout& layout() const { return layout_; }
    const ConverterParams& converter() const { return spec_.converter; }
    int n() const { return layout_.n; }
    int m() const { return layout_.m; }

    /// Time derivative of the packed state for DC inputs u (length n).
    /// Throws DimensionError on size mismatch.
    Vec operator()(const Vec& z, const Vec& u) const;
    /// Allocation-free variant for the integrator; `dz` must be sized.
    void eval(const Vec& z, const Vec& u, Vec& dz) const;

private:
    NetworkSpec spec_;
    StateLayout layout_;
};

Vec vector_field(const Network& net, const Vec& z, const Vec& u);
SystemState vector_field(const Network& net, const SystemState& s, const Vec& u);

}  // namespace convsync
