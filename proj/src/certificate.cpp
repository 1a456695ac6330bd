#include "convsync/certificate.hpp"

#include "convsync/errors.hpp"
#include "convsync/matrix_algebra.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace convsync {

namespace {

constexpr const char* kModule = "certificate";

/// Orthonormal basis of the complement of a unit vector.
Mat complement_basis(const Vec& p) {
    Eigen::HouseholderQR<Mat> qr(p);
    const Mat q = qr.householderQ();
    return q.rightCols(p.size() - 1);
}

}  // namespace

Certificate build_certificate(const Mat& a11, const Mat& a12, const Mat& a21, const Mat& a22, const Vec& p) {
    const Eigen::Index n1 = a11.rows(), n2 = a22.rows();
    if (a11.cols() != n1 || a22.cols() != n2 || a12.rows() != n1 || a12.cols() != n2 || a21.rows() != n2 ||
        a21.cols() != n1 || p.size() != n1 + n2)
        throw DimensionError(kModule, "partitioned blocks have inconsistent sizes");
    if (!(p.norm() > 0.0)) throw DimensionError(kModule, "kernel vector must be nonzero");

    const double a11_abscissa = spectral_abscissa(a11);
    if (!(a11_abscissa < 0.0))
        throw AssumptionError(kModule, "a11-hurwitz", "A11 is not Hurwitz (spectral abscissa " +
                                                           std::to_string(a11_abscissa) + ")",
                              a11_abscissa);

    Certificate cert;
    cert.jacobian.resize(n1 + n2, n1 + n2);
    cert.jacobian << a11, a12, a21, a22;
    cert.kernel = p.normalized();

    cert.p1 = solve_lyapunov(a11, Mat::Identity(n1, n1));
    cert.f = a22 + a21 * cert.p1 * a12;
    const double f_abscissa = spectral_abscissa(cert.f);
    if (!(f_abscissa < 0.0))
        throw AssumptionError(kModule, "small-gain", "F = A22 + A21 P1 A12 is not Hurwitz (spectral abscissa " +
                                                           std::to_string(f_abscissa) + ")",
                              f_abscissa);

    const Vec p2v = cert.kernel.tail(n2);
    Mat q2 = Mat::Identity(n2, n2);
    if (p2v.squaredNorm() > 0.0) q2 -= p2v * p2v.transpose() / p2v.squaredNorm();
    const Mat n_mat = a12.transpose() * cert.p1;
    const Mat c_mat = sqrtm_psd(symmetrize(n_mat * n_mat.transpose()) + q2);

    // With a kernel the closed loop F + A21 A21^T P2 maps p2 to A22 p2 + A21 p1 = 0,
    // so the gain reaches 1 at zero frequency along p2 by construction. The
    // test is then that 1 is attained only there.
    cert.g_norm = hinf_norm(cert.f, a21, c_mat);
    const bool marginal = p2v.squaredNorm() > 1e-24;
    if (!marginal && !(cert.g_norm < 1.0))
        throw AssumptionError(kModule, "small-gain",
                              "||G||_inf = " + std::to_string(cert.g_norm) + " is not below 1", cert.g_norm);

    AreSolution are;
    try {
        are = marginal ? solve_hinf_are_marginal(cert.f, a21, c_mat, p2v) : solve_hinf_are(cert.f, a21, c_mat);
    } catch (const InfeasibleError& e) {
        throw AssumptionError(kModule, "small-gain",
                              "||G||_inf = " + std::to_string(cert.g_norm) + " exceeds 1 (" + e.what() + ")",
                              cert.g_norm);
    } catch (const NumericalError& e) {
        if (cert.g_norm > 1.0 + 1e-3)
            throw AssumptionError(kModule, "small-gain", "||G||_inf = " + std::to_string(cert.g_norm) + " exceeds 1",
                                  cert.g_norm);
        throw;
    }
    cert.are_stabilizing = are.stabilizing();
    cert.are_origin_residual = are.origin_residual;
    cert.p2 = are.p2;
    cert.are_residual = are.residual;

    cert.p = Mat::Zero(n1 + n2, n1 + n2);
    cert.p.topLeftCorner(n1, n1) = cert.p1;
    cert.p.bottomRightCorner(n2, n2) = cert.p2;

    cert.h_of_p = a12.transpose() * cert.p1 + cert.p2 * a21;
    cert.q_of_p.resize(n1 + n2, n1 + n2);
    cert.q_of_p << Mat::Identity(n1, n1), -cert.h_of_p.transpose(), -cert.h_of_p,
        symmetrize(cert.h_of_p * cert.h_of_p.transpose()) + q2;

    const Mat& j = cert.jacobian;
    cert.lyapunov_residual = (cert.p * j + j.transpose() * cert.p + cert.q_of_p).norm();

    const Eigen::SelfAdjointEigenSolver<Mat> pe(cert.p, Eigen::EigenvaluesOnly);
    cert.p_min_eigenvalue = pe.eigenvalues().minCoeff();
    cert.p_positive_definite = is_positive_definite(cert.p);

    const Eigen::SelfAdjointEigenSolver<Mat> qe(cert.q_of_p, Eigen::EigenvaluesOnly);
    cert.q_min_eigenvalue = qe.eigenvalues().minCoeff();
    const Mat basis = complement_basis(cert.kernel);
    const Mat q_perp = symmetrize(basis.transpose() * cert.q_of_p * basis);
    cert.q_min_eigenvalue_perp = Eigen::SelfAdjointEigenSolver<Mat>(q_perp, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    cert.q_kernel_residual = (cert.q_of_p * cert.kernel).norm();
    cert.q_semidefinite_wrt_kernel = is_positive_semidefinite_wrt(cert.q_of_p, cert.kernel);
    return cert;
}

Certificate build_certificate(const LinearizedSystem& lin) {
    return build_certificate(lin.A11, lin.A12, lin.A21, lin.A22, lin.kernel_vector);
}

Mat closed_form_P1(const LinearizedSystem& lin, const ConverterParams& c) {
    const Vec h = lin.hessian_u.diagonal();
    for (Eigen::Index k = 0; k < h.size(); ++k)
        if (!(h(k) > 0.0))
            throw AssumptionError(kModule, "ac-power-factor",
                                  "closed-form P1 needs a positive Hessian diagonal (Q_x,k > 0); entry " +
                                      std::to_string(k) + " is " + std::to_string(h(k)),
                                  h(k));
    const Eigen::Index n = h.size();
    const Vec hinv = h.cwiseInverse();
    const Vec one_plus = Vec::Ones(n) + c.eta * c.c_dc * hinv;
    const Vec p11 = (0.5 * c.k_p * hinv + (h / (2.0 * c.k_p)).cwiseProduct(one_plus)) / c.eta;
    const Vec p12 = 0.5 * c.c_dc * hinv;
    const Vec p22 = c.c_dc / (2.0 * c.k_p) * one_plus;

    Mat p1 = Mat::Zero(2 * n, 2 * n);
    p1.topLeftCorner(n, n) = p11.asDiagonal();
    p1.topRightCorner(n, n) = p12.asDiagonal();
    p1.bottomLeftCorner(n, n) = p12.asDiagonal();
    p1.bottomRightCorner(n, n) = p22.asDiagonal();
    return p1;
}

double lyapunov_value(const Certificate& cert, const Vec& x) {
    const Vec pp = cert.p * cert.kernel;
    const double px = pp.dot(x);
    return x.dot(cert.p * x) - px * px / cert.kernel.dot(pp);
}

double lyapunov_value_projector(const Certificate& cert, const Vec& x) {
    const Mat half = sqrtm_psd(cert.p);
    const Vec y = half * x, w = half * cert.kernel;
    const double wy = w.dot(y);
    return y.squaredNorm() - wy * wy / w.squaredNorm();
}

double lyapunov_derivative(const Certificate& cert, const Vec& x) { return -x.dot(cert.q_of_p * x); }

GammaDiagnostic gamma_diagnostic(const LinearizedSystem& lin, const NetworkSpec& spec) {
    const auto& c = spec.converter;
    const StateLayout& L = lin.layout;
    const int n = L.n, m = L.m;
    GammaDiagnostic out;

    const Mat p1 = solve_lyapunov(lin.A11, Mat::Identity(2 * n, 2 * n));
    const Mat p12 = p1.topRightCorner(n, n), p22 = p1.bottomRightCorner(n, n);
    const Mat& xi = lin.xi_mat;
    const Mat& lam = lin.lambda_mat;
    out.gamma = 2.0 * c.r_f * Mat::Identity(2 * n, 2 * n) +
                (xi * p12 * lam.transpose() + lam * p12 * xi.transpose()) / c.c_dc +
                2.0 * lam * p22 * lam.transpose() / c.c_dc;
    out.gamma = symmetrize(out.gamma);
    out.gamma_min_eigenvalue = Eigen::SelfAdjointEigenSolver<Mat>(out.gamma, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    out.gamma_positive_definite = out.gamma_min_eigenvalue > 0.0;

    const Mat f = lin.A22 + lin.A21 * p1 * lin.A12;
    out.f_hurwitz = is_hurwitz(f);
    Vec pf(L.ac_size());
    pf.head(2 * n).setConstant(c.l_f);
    pf.segment(2 * n, 2 * n).setConstant(c.c_f);
    pf.tail(2 * m).setConstant(spec.line.l_line);
    Mat qf = Mat::Zero(L.ac_size(), L.ac_size());
    qf.topLeftCorner(2 * n, 2 * n) = out.gamma;
    qf.block(2 * n, 2 * n, 2 * n, 2 * n) = 2.0 * c.g_load * Mat::Identity(2 * n, 2 * n);
    qf.bottomRightCorner(2 * m, 2 * m) = 2.0 * spec.line.r_line * Mat::Identity(2 * m, 2 * m);
    const Mat pff = pf.asDiagonal() * f;
    out.pair_residual = (pff + pff.transpose() + qf).norm() / qf.norm();
    return out;
}

}  // namespace convsync
