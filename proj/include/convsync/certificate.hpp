#pragma once

// Block-diagonal Lyapunov certificate for the linearization at a synchronous
// steady state. The quadratic form vanishes on the orbit tangent p, so it
// certifies stability of span{p} rather than of a single point.

#include "convsync/linearize.hpp"

namespace convsync {

struct Certificate {
    Mat p;       // blkdiag(P1, P2)
    Mat p1;      // 2n x 2n, on (gamma, v_dc)
    Mat p2;      // on AC slots
    Mat q_of_p;  // [[I, -H^T], [-H, H H^T + Q2]]
    Mat h_of_p;  // A12^T P1 + P2 A21
    Mat jacobian;
    Vec kernel;  // unit-norm p

    Mat f;               // A22 + A21 P1 A12
    double g_norm = 0.0;  // ||C (sI - F)^{-1} A21||_inf, equal to 1 when p2 != 0
    double are_residual = 0.0;
    bool are_stabilizing = false;      // closed loop stable apart from the p2 mode
    double are_origin_residual = 0.0;  // |(F + A21 A21^T P2) p2| / |p2|
    double lyapunov_residual = 0.0;  // ||P J + J^T P + Q(P)||_F
    double p_min_eigenvalue = 0.0;
    double q_min_eigenvalue = 0.0;          // over all of R^N
    double q_min_eigenvalue_perp = 0.0;     // on the complement of p
    double q_kernel_residual = 0.0;         // ||Q(P) p||
    bool p_positive_definite = false;
    bool q_semidefinite_wrt_kernel = false;

    bool valid() const { return p_positive_definite && q_semidefinite_wrt_kernel; }
};

/// Q1 = I, Q2 = I - p2 p2^T / |p2|^2. Throws AssumptionError tagged
/// "a11-hurwitz" (A11 not Hurwitz) or "small-gain" (F not Hurwitz, or the
/// gain exceeds 1 anywhere other than along p2 at zero frequency; the
/// measured norm is attached).
Certificate build_certificate(const LinearizedSystem& lin);

/// Same pipeline for a generic partitioned matrix [[A11, A12], [A21, A22]]
/// with kernel vector p.
Certificate build_certificate(const Mat& a11, const Mat& a12, const Mat& a21, const Mat& a22, const Vec& p);

/// P1 from the explicit block formulas. Throws AssumptionError
/// ("ac-power-factor") when a diagonal entry of the Hessian is not positive.
Mat closed_form_P1(const LinearizedSystem& lin, const ConverterParams& c);

/// V(x) = x^T (P - P p p^T P / p^T P p) x
double lyapunov_value(const Certificate& cert, const Vec& x);
/// Same value through the projection y^T (I - w w^T / w^T w) y,
/// y = P^{1/2} x, w = P^{1/2} p.
double lyapunov_value_projector(const Certificate& cert, const Vec& x);
/// dV/dt along x' = J x, evaluated as -x^T Q(P) x.
double lyapunov_derivative(const Certificate& cert, const Vec& x);

/// Diagnostic pair from the sufficient-condition argument:
/// P_F = blkdiag(L I, C I, L_l I), Q_F = blkdiag(Gamma, 2G I, 2R_l I).
struct GammaDiagnostic {
    Mat gamma;
    double gamma_min_eigenvalue = 0.0;
    bool gamma_positive_definite = false;
    double pair_residual = 0.0;  // ||P_F F + F^T P_F + Q_F||_F / ||Q_F||_F
    bool f_hurwitz = false;
};
GammaDiagnostic gamma_diagnostic(const LinearizedSystem& lin, const NetworkSpec& spec);

}  // namespace convsync
