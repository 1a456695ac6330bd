#include "convsync/linearize.hpp"

#include "convsync/errors.hpp"
#include "convsync/matrix_algebra.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace convsync {

Mat hessian_U(const SteadyState& ss, const NetworkSpec& spec) {
    const int n = ss.layout.n;
    const double mu = spec.converter.mu;
    const Vec i_star = ss.i_star();
    Vec direct(n);
    for (int k = 0; k < n; ++k)
        direct(k) = 0.5 * mu * (j2() * rotation_vector(ss.gamma_star(k))).dot(i_star.segment<2>(2 * k));

    const Mat rot = rot_matrix(ss.gamma_star);
    const Vec via_y = 0.25 * ss.v_dc_star * mu * mu *
                      (rot.transpose() * j_matrix(n).transpose() * ss.admittance_Y * rot * Vec::Ones(n));

    const double scale = std::max(direct.lpNorm<Eigen::Infinity>(), std::numeric_limits<double>::min());
    if ((direct - via_y).lpNorm<Eigen::Infinity>() > 1e-9 * scale)
        throw NumericalError("linearize", "internal consistency: the two Hessian forms disagree");
    return direct.asDiagonal();
}

LinearizedSystem jacobian(const SteadyState& ss, const NetworkSpec& spec) {
    const StateLayout& L = ss.layout;
    const auto& c = spec.converter;
    const auto& ln = spec.line;
    const int n = L.n, m = L.m;
    const ImpedanceSet z = impedances(spec);
    const Mat b = m > 0 ? expanded_incidence(spec) : Mat::Zero(2 * n, 0);
    const Mat rot = rot_matrix(ss.gamma_star);

    LinearizedSystem lin;
    lin.layout = L;
    lin.hessian_u = hessian_U(ss, spec);
    lin.lambda_mat = 0.5 * c.mu * rot;
    lin.xi_mat = 0.5 * c.mu * ss.v_dc_star * j_matrix(n) * rot;

    Mat& j = lin.jacobian;
    j = Mat::Zero(L.size(), L.size());
    const Mat id_n = Mat::Identity(n, n), id_2n = Mat::Identity(2 * n, 2 * n);

    j.block(L.gamma(), L.v_dc(), n, n) = c.eta * id_n;

    j.block(L.v_dc(), L.gamma(), n, n) = -lin.hessian_u / c.c_dc;
    j.block(L.v_dc(), L.v_dc(), n, n) = -c.k_p / c.c_dc * id_n;
    j.block(L.v_dc(), L.i_f(), n, 2 * n) = -lin.lambda_mat.transpose() / c.c_dc;

    j.block(L.i_f(), L.gamma(), 2 * n, n) = lin.xi_mat / c.l_f;
    j.block(L.i_f(), L.v_dc(), 2 * n, n) = lin.lambda_mat / c.l_f;
    j.block(L.i_f(), L.i_f(), 2 * n, 2 * n) = -z.z_r / c.l_f;
    j.block(L.i_f(), L.v_c(), 2 * n, 2 * n) = -id_2n / c.l_f;

    j.block(L.v_c(), L.i_f(), 2 * n, 2 * n) = id_2n / c.c_f;
    j.block(L.v_c(), L.v_c(), 2 * n, 2 * n) = -z.z_c / c.c_f;
    if (m > 0) {
        j.block(L.v_c(), L.i_line(), 2 * n, 2 * m) = -b / c.c_f;
        j.block(L.i_line(), L.v_c(), 2 * m, 2 * n) = b.transpose() / ln.l_line;
        j.block(L.i_line(), L.i_line(), 2 * m, 2 * m) = -z.z_ell / ln.l_line;
    }

    const int n1 = 2 * n, n2 = L.ac_size();
    lin.A11 = j.topLeftCorner(n1, n1);
    lin.A12 = j.topRightCorner(n1, n2);
    lin.A21 = j.bottomLeftCorner(n2, n1);
    lin.A22 = j.bottomRightCorner(n2, n2);

    lin.kernel_vector = Vec::Zero(L.size());
    lin.kernel_vector.segment(L.gamma(), n).setOnes();
    const Vec x_star = ss.x_star();
    for (int k = 0; k < L.ac_size(); k += 2) lin.kernel_vector.segment<2>(L.ac() + k) = j2() * x_star.segment<2>(k);
    return lin;
}

Mat finite_difference_jacobian(const Network& net, const Vec& z, const Vec& u) {
    const Eigen::Index dim = z.size();
    Mat out(dim, dim);
    for (Eigen::Index col = 0; col < dim; ++col) {
        const double h = 1e-6 * (1.0 + std::abs(z(col)));
        Vec zp = z, zm = z;
        zp(col) += h;
        zm(col) -= h;
        out.col(col) = (net(zp, u) - net(zm, u)) / (2.0 * h);
    }
    return out;
}

EigenSplit eigen_split(const Mat& j, double tol_zero) {
    if (j.rows() != j.cols()) throw DimensionError("linearize", "eigen_split: matrix must be square");
    EigenSplit out;
    if (j.size() == 0) return out;
    const double norm2 = Eigen::JacobiSVD<Mat>(j).singularValues()(0);
    out.tol_zero = tol_zero >= 0.0 ? tol_zero : 1e-7 * norm2;

    const Balanced bal = balance(j);
    Eigen::EigenSolver<Mat> es(bal.matrix, true);
    if (es.info() != Eigen::Success) throw NumericalError("linearize", "eigensolver did not converge");
    out.eigenvalues = es.eigenvalues();
    // Eigenvectors of D^{-1} J D map back through D.
    const Eigen::MatrixXcd vecs = bal.scale.cast<std::complex<double>>().asDiagonal() * es.eigenvectors();

    std::vector<Eigen::Index> zero_idx;
    double max_re = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < out.eigenvalues.size(); ++i) {
        const auto l = out.eigenvalues(i);
        if (std::abs(l) <= out.tol_zero) {
            zero_idx.push_back(i);
            continue;
        }
        max_re = std::max(max_re, l.real());
        if (l.real() < -out.tol_zero)
            ++out.stable_count;
        else
            ++out.unstable_count;
    }
    out.zero_modes = static_cast<int>(zero_idx.size());
    out.zero_eigenvectors.resize(j.rows(), out.zero_modes);
    for (int i = 0; i < out.zero_modes; ++i) out.zero_eigenvectors.col(i) = vecs.col(zero_idx[i]).normalized();
    out.spectral_gap = std::isfinite(max_re) ? -max_re : std::numeric_limits<double>::infinity();
    return out;
}

EigenSplit eigen_split(const LinearizedSystem& lin, double tol_zero) { return eigen_split(lin.jacobian, tol_zero); }

}  // namespace convsync
