#pragma once

// Analytic linearization at a synchronous steady state and the eigenvalue
// split test (one zero mode along the orbit, all other modes stable).

#include "convsync/steady_state.hpp"

#include <Eigen/Dense>

namespace convsync {

/// Jacobian of the vector field at z*, partitioned as
///   z1 = (gamma, v_dc)  (2n slots),  z2 = AC slots (4n + 2m).
struct LinearizedSystem {
    StateLayout layout;
    Mat jacobian;
    Mat A11, A12, A21, A22;
    Vec kernel_vector;  // [1_n; 0; J x*]
    Mat hessian_u;      // n x n diagonal
    Mat xi_mat;         // 2n x n,  (mu/2) v_dc* J Rot(gamma*)
    Mat lambda_mat;     // 2n x n,  (mu/2) Rot(gamma*)
    Vec v1() const { return kernel_vector.head(2 * layout.n); }
    Vec v2() const { return kernel_vector.tail(layout.ac_size()); }
};

/// diag((mu/2) (J r(gamma_k))^T i_k*), computed from the recovered currents
/// and, independently, as (v_dc*/4) mu^2 diag(Rot^T J^T Y Rot 1). Throws
/// NumericalError if the two disagree beyond 1e-9 (relative).
Mat hessian_U(const SteadyState& ss, const NetworkSpec& spec);

LinearizedSystem jacobian(const SteadyState& ss, const NetworkSpec& spec);

/// Central-difference Jacobian of the vector field at z, step
/// 1e-6 (1 + |z_j|) per coordinate. Used as a test oracle.
Mat finite_difference_jacobian(const Network& net, const Vec& z, const Vec& u);

struct EigenSplit {
    Eigen::VectorXcd eigenvalues;
    int zero_modes = 0;
    Eigen::MatrixXcd zero_eigenvectors;  // one column per zero mode
    int stable_count = 0;
    int unstable_count = 0;
    double spectral_gap = 0.0;  // -max Re(lambda) over non-zero modes
    double tol_zero = 0.0;
    bool stable_split() const { return zero_modes == 1 && unstable_count == 0; }
};

/// Classifies eigenvalues: |lambda| <= tol_zero is a zero mode, Re < -tol_zero
/// stable, everything else unstable. A negative `tol_zero` selects the
/// default 1e-7 ||J||_2.
EigenSplit eigen_split(const Mat& j, double tol_zero = -1.0);
EigenSplit eigen_split(const LinearizedSystem& lin, double tol_zero = -1.0);

}  // namespace convsync
