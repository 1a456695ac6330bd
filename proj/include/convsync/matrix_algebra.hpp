#pragma once

// Dense solvers for the Lyapunov certificate: Lyapunov and H-infinity
// Riccati equations, H-infinity norms by Hamiltonian bisection, and
// definiteness tests.

#include <Eigen/Dense>

#include <complex>

namespace convsync {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;

/// (M + M^T) / 2
Mat symmetrize(const Mat& m);

/// Diagonal similarity scaling D^{-1} A D with power-of-two entries that
/// equalizes row and column norms (no permutations).
struct Balanced {
    Mat matrix;  // D^{-1} A D
    Vec scale;   // diagonal of D
};
Balanced balance(const Mat& a);

/// Eigenvalues computed on the balanced matrix.
CVec eigenvalues(const Mat& a);
/// max Re(lambda)
double spectral_abscissa(const Mat& a);
bool is_hurwitz(const Mat& a);

/// Solves P A + A^T P = -Q by complex Schur form and triangular back
/// substitution. Throws NotHurwitzError if A is not Hurwitz.
Mat solve_lyapunov(const Mat& a, const Mat& q);

struct AreSolution {
    Mat p2;
    double residual = 0.0;                       // Frobenius norm of the Riccati residual
    double closed_loop_spectral_abscissa = 0.0;  // max Re eig(F + B B^T P2), origin mode excluded
    int origin_modes = 0;                        // closed-loop modes kept at the origin
    double origin_residual = 0.0;                // |(F + B B^T P2) d| for the unit null direction d
    bool stabilizing() const { return closed_loop_spectral_abscissa < 0.0; }
};

/// Stabilizing solution of  P B B^T P + P F + F^T P + C^T C = 0  from the
/// stable invariant subspace of the Hamiltonian [F, B B^T; -C^T C, -F^T].
/// Throws NotHurwitzError (F), InfeasibleError (Hamiltonian eigenvalue on the
/// imaginary axis) or NumericalError (degenerate subspace).
AreSolution solve_hinf_are(const Mat& f, const Mat& b, const Mat& c);

/// Variant for Riccati equations whose closed loop F + B B^T P2 must keep
/// the direction `null_direction` at the origin (the case when the full
/// system has a kernel). The Hamiltonian then carries one eigenvalue pair at
/// 0 by construction; P2 is taken from the stable invariant subspace plus the
/// Hamiltonian null vector. Any other eigenvalue on the imaginary axis raises
/// InfeasibleError.
AreSolution solve_hinf_are_marginal(const Mat& f, const Mat& b, const Mat& c, const Vec& null_direction);

/// || C (sI - F)^{-1} B ||_inf by bisection on the Hamiltonian test,
/// terminated at relative bracket width `rel_tol`.
double hinf_norm(const Mat& f, const Mat& b, const Mat& c, double rel_tol = 1e-6);

/// sup_w || (jw I - F)^{-1} ||_2
double resolvent_sup(const Mat& f);

/// Largest singular value of C (jw I - F)^{-1} B.
double gain_at(const Mat& f, const Mat& b, const Mat& c, double omega);

/// Definiteness tests on symmetric matrices. Inputs whose relative asymmetry
/// exceeds 1e-10 are rejected with DimensionError; tolerances are relative to
/// the spectral norm of `m` (floored at 1).
bool is_positive_definite(const Mat& m, double tol = 1e-10);
bool is_positive_semidefinite(const Mat& m, double tol = 1e-10);
/// m >= 0 and ker(m) = span(kernel_basis).
bool is_positive_semidefinite_wrt(const Mat& m, const Mat& kernel_basis, double tol = 1e-10);

/// Symmetric square root of a positive semidefinite matrix. Eigenvalues in
/// [-1e-12 * max|lambda|, 0) are zeroed; more negative ones raise NumericalError.
Mat sqrtm_psd(const Mat& m);

}  // namespace convsync
