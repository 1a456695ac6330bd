#include "convsync/matrix_algebra.hpp"

#include "convsync/errors.hpp"

#include <Eigen/Eigenvalues>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace convsync {

namespace {

using Cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;

constexpr const char* kModule = "matrix_algebra";

void require_square(const Mat& a, const char* what) {
    if (a.rows() != a.cols()) throw DimensionError(kModule, std::string(what) + " must be square");
}

/// Eigenvalue treated as lying on the imaginary axis.
bool on_imaginary_axis(const Cplx& lambda) {
    return std::abs(lambda.real()) <= 1e-8 * std::max(1.0, std::abs(lambda));
}

bool has_imaginary_axis_eigenvalue(const Mat& h) {
    const CVec ev = eigenvalues(h);
    return std::any_of(ev.data(), ev.data() + ev.size(), on_imaginary_axis);
}

Mat hamiltonian(const Mat& f, const Mat& bbt, const Mat& ctc) {
    const Eigen::Index k = f.rows();
    Mat h(2 * k, 2 * k);
    h.topLeftCorner(k, k) = f;
    h.topRightCorner(k, k) = bbt;
    h.bottomLeftCorner(k, k) = -ctc;
    h.bottomRightCorner(k, k) = -f.transpose();
    return h;
}

lapack_logical select_open_lhp(const double* wr, const double* /*wi*/) { return *wr < 0.0; }

thread_local double select_threshold = 0.0;
lapack_logical select_below_threshold(const double* wr, const double* /*wi*/) { return *wr < -select_threshold; }

/// Real Schur vectors of h with the eigenvalues selected by `select` leading.
Mat ordered_schur_basis(Mat h, LAPACK_D_SELECT2 select, Eigen::Index expected) {
    const lapack_int dim = static_cast<lapack_int>(h.rows());
    lapack_int sdim = 0;
    Vec wr(dim), wi(dim);
    Mat vs(dim, dim);
    const lapack_int info =
        LAPACKE_dgees(LAPACK_COL_MAJOR, 'V', 'S', select, dim, h.data(), dim, &sdim, wr.data(), wi.data(), vs.data(), dim);
    if (info != 0) throw NumericalError(kModule, "ordered Schur decomposition failed");
    if (sdim != expected)
        throw NumericalError(kModule, "stable invariant subspace of the Hamiltonian has wrong dimension");
    return vs.leftCols(expected);
}

/// P2 = X2 X1^{-1} from a basis [X1; X2] of a Lagrangian subspace.
Mat graph_solution(const Mat& basis) {
    const Eigen::Index k = basis.cols();
    const Mat x1 = basis.topRows(k);
    const Mat x2 = basis.bottomRows(k);
    Eigen::PartialPivLU<Mat> lu(x1);
    if (!(lu.rcond() > 1e-13))
        throw NumericalError(kModule, "stable invariant subspace is not a graph (X1 singular)");
    // P2 = X2 X1^{-1}  <=>  X1^T P2^T = X2^T
    const Mat p2t = lu.transpose().solve(Mat(x2.transpose()));
    return symmetrize(p2t.transpose());
}

/// Symmetric input check shared by the definiteness tests.
Eigen::VectorXd symmetric_eigenvalues(const Mat& m) {
    require_square(m, "matrix");
    const double nrm = m.norm();
    if ((m - m.transpose()).norm() > 1e-10 * std::max(nrm, std::numeric_limits<double>::min()))
        throw DimensionError(kModule, "definiteness test requires a symmetric matrix");
    return Eigen::SelfAdjointEigenSolver<Mat>(symmetrize(m), Eigen::EigenvaluesOnly).eigenvalues();
}

double tol_scale(const Eigen::VectorXd& ev) {
    return ev.size() ? std::max(1.0, ev.cwiseAbs().maxCoeff()) : 1.0;
}

}  // namespace

Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

Balanced balance(const Mat& a) {
    require_square(a, "balance");
    constexpr double radix = 2.0, radix2 = radix * radix;
    const Eigen::Index n = a.rows();
    Balanced out{a, Vec::Ones(n)};
    Mat& m = out.matrix;
    bool done = false;
    for (int sweep = 0; sweep < 100 && !done; ++sweep) {
        done = true;
        for (Eigen::Index i = 0; i < n; ++i) {
            double c = m.col(i).cwiseAbs().sum() - std::abs(m(i, i));
            double r = m.row(i).cwiseAbs().sum() - std::abs(m(i, i));
            if (c == 0.0 || r == 0.0) continue;
            const double s = c + r;
            double f = 1.0;
            double g = r / radix;
            while (c < g) {
                f *= radix;
                c *= radix2;
            }
            g = r * radix;
            while (c >= g) {
                f /= radix;
                c /= radix2;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                out.scale(i) *= f;
                m.row(i) /= f;
                m.col(i) *= f;
            }
        }
    }
    return out;
}

CVec eigenvalues(const Mat& a) {
    require_square(a, "eigenvalues");
    if (a.size() == 0) return CVec();
    Eigen::EigenSolver<Mat> es(balance(a).matrix, false);
    if (es.info() != Eigen::Success) throw NumericalError(kModule, "eigenvalue iteration did not converge");
    return es.eigenvalues();
}

double spectral_abscissa(const Mat& a) {
    const CVec ev = eigenvalues(a);
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& l : ev) best = std::max(best, l.real());
    return best;
}

bool is_hurwitz(const Mat& a) { return a.size() == 0 || spectral_abscissa(a) < 0.0; }

Mat solve_lyapunov(const Mat& a, const Mat& q) {
    require_square(a, "a");
    if (q.rows() != a.rows() || q.cols() != a.cols()) throw DimensionError(kModule, "q must match a");
    const Eigen::Index n = a.rows();
    if (n == 0) return Mat();

    Eigen::ComplexSchur<Mat> schur(a);
    if (schur.info() != Eigen::Success) throw NumericalError(kModule, "Schur decomposition failed");
    const CMat& t = schur.matrixT();
    const CMat& u = schur.matrixU();
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(t(i, i).real() < 0.0))
            throw NotHurwitzError(kModule, "Lyapunov equation has no unique solution: a is not Hurwitz");

    // X T + T^H X = C with X = U^H P U, C = -U^H Q U; solve column by column.
    const CMat c = -(u.adjoint() * q.cast<Cplx>() * u);
    const CMat th = t.adjoint();
    CMat x = CMat::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::VectorXcd rhs = c.col(j);
        if (j > 0) rhs -= x.leftCols(j) * t.col(j).head(j);
        CMat lhs = th;
        lhs.diagonal().array() += t(j, j);
        x.col(j) = lhs.triangularView<Eigen::Lower>().solve(rhs);
    }
    return symmetrize((u * x * u.adjoint()).real());
}

AreSolution solve_hinf_are(const Mat& f, const Mat& b, const Mat& c) {
    require_square(f, "f");
    const Eigen::Index k = f.rows();
    if (b.rows() != k || c.cols() != k) throw DimensionError(kModule, "solve_hinf_are: incompatible b or c");
    if (!is_hurwitz(f)) throw NotHurwitzError(kModule, "solve_hinf_are: f is not Hurwitz");

    const Mat bbt = b * b.transpose();
    const Mat ctc = c.transpose() * c;
    Mat h = hamiltonian(f, bbt, ctc);
    if (has_imaginary_axis_eigenvalue(h))
        throw InfeasibleError(kModule,
                              "Hamiltonian has eigenvalues on the imaginary axis; no stabilizing "
                              "Riccati solution (gain >= 1)");

    const Mat p2 = graph_solution(ordered_schur_basis(h, select_open_lhp, k));

    AreSolution out;
    out.p2 = p2;
    out.residual = (p2 * bbt * p2 + p2 * f + f.transpose() * p2 + ctc).norm();
    out.closed_loop_spectral_abscissa = spectral_abscissa(f + bbt * p2);
    return out;
}

AreSolution solve_hinf_are_marginal(const Mat& f, const Mat& b, const Mat& c, const Vec& null_direction) {
    require_square(f, "f");
    const Eigen::Index k = f.rows();
    if (b.rows() != k || c.cols() != k || null_direction.size() != k)
        throw DimensionError(kModule, "solve_hinf_are_marginal: incompatible b, c or null direction");
    if (!(null_direction.norm() > 0.0)) throw DimensionError(kModule, "null direction must be nonzero");
    if (!is_hurwitz(f)) throw NotHurwitzError(kModule, "solve_hinf_are_marginal: f is not Hurwitz");

    const Mat bbt = b * b.transpose();
    const Mat ctc = c.transpose() * c;
    const Mat h = hamiltonian(f, bbt, ctc);
    const double scale = std::max(1.0, h.cwiseAbs().rowwise().sum().maxCoeff());

    // The two eigenvalues closest to the origin form the structural pair.
    const CVec ev = eigenvalues(h);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(ev.size()));
    for (Eigen::Index i = 0; i < ev.size(); ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return std::abs(ev(a)) < std::abs(ev(b)); });
    const double pair = std::abs(ev(order[1]));
    if (pair > 1e-5 * scale)
        throw NumericalError(kModule, "Hamiltonian has no eigenvalue pair at the origin (closest |lambda| = " +
                                          std::to_string(pair) + "); the null direction is not a closed-loop mode");
    double rest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 2; i < order.size(); ++i) {
        const Cplx l = ev(order[i]);
        if (on_imaginary_axis(l))
            throw InfeasibleError(kModule,
                                  "Hamiltonian has eigenvalues on the imaginary axis away from the origin; no "
                                  "Riccati solution (gain >= 1)");
        rest = std::min(rest, std::abs(l.real()));
    }
    if (!(rest > 4.0 * pair)) throw NumericalError(kModule, "origin pair of the Hamiltonian is not separated");
    select_threshold = std::sqrt(pair * rest);
    const Mat stable = ordered_schur_basis(h, select_below_threshold, k - 1);

    // Null vector of the Hamiltonian whose upper half is closest to the null
    // direction (the null space is one-dimensional unless the pair is
    // semisimple), orthogonalized against the stable part.
    Eigen::JacobiSVD<Mat> svd(h, Eigen::ComputeFullV);
    const Vec sv = svd.singularValues();
    Eigen::Index dim_null = 1;
    while (dim_null < 2 && sv(2 * k - 1 - dim_null) <= 1e-10 * sv(0)) ++dim_null;
    const Mat null_basis = svd.matrixV().rightCols(dim_null);
    Vec v = null_basis * (null_basis.topRows(k).transpose() * null_direction);
    if (!(v.norm() > 0.0)) v = null_basis.col(0);
    v -= stable * (stable.transpose() * v);
    v.normalize();
    Mat basis(2 * k, k);
    basis << stable, v;
    const Mat p2 = graph_solution(basis);

    AreSolution out;
    out.p2 = p2;
    out.residual = (p2 * bbt * p2 + p2 * f + f.transpose() * p2 + ctc).norm();
    const Mat closed = f + bbt * p2;
    out.origin_modes = 1;
    out.origin_residual = (closed * null_direction.normalized()).norm();
    const CVec cl = eigenvalues(closed);
    Eigen::Index nearest = 0;
    for (Eigen::Index i = 1; i < cl.size(); ++i)
        if (std::abs(cl(i)) < std::abs(cl(nearest))) nearest = i;
    out.closed_loop_spectral_abscissa = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < cl.size(); ++i)
        if (i != nearest) out.closed_loop_spectral_abscissa = std::max(out.closed_loop_spectral_abscissa, cl(i).real());
    if (k == 1) out.closed_loop_spectral_abscissa = -std::numeric_limits<double>::infinity();
    return out;
}

double gain_at(const Mat& f, const Mat& b, const Mat& c, double omega) {
    CMat m = -f.cast<Cplx>();
    m.diagonal().array() += Cplx(0.0, omega);
    const CMat x = m.partialPivLu().solve(b.cast<Cplx>());
    const CMat g = c.cast<Cplx>() * x;
    if (g.size() == 0) return 0.0;
    return Eigen::JacobiSVD<CMat>(g).singularValues()(0);
}

double hinf_norm(const Mat& f, const Mat& b, const Mat& c, double rel_tol) {
    require_square(f, "f");
    if (b.rows() != f.rows() || c.cols() != f.rows())
        throw DimensionError(kModule, "hinf_norm: incompatible b or c");
    const CVec ev = eigenvalues(f);
    for (const auto& l : ev)
        if (!(l.real() < 0.0)) throw NotHurwitzError(kModule, "H-infinity norm is unbounded: f is not Hurwitz");
    if (b.norm() == 0.0 || c.norm() == 0.0) return 0.0;

    // Lower bound from the DC gain; the resonance frequencies of f tighten it.
    double lo = gain_at(f, b, c, 0.0);
    for (const auto& l : ev) lo = std::max(lo, gain_at(f, b, c, std::abs(l.imag())));

    const Mat bbt = b * b.transpose();
    const Mat ctc = c.transpose() * c;
    auto is_upper_bound = [&](double g) { return !has_imaginary_axis_eigenvalue(hamiltonian(f, bbt / (g * g), ctc)); };

    double hi = lo > 0.0 ? 2.0 * lo : 1.0;
    for (int i = 0; i < 200 && !is_upper_bound(hi); ++i) hi *= 2.0;
    if (lo <= 0.0) lo = 0.0;
    for (int i = 0; i < 200 && (hi - lo) > rel_tol * hi; ++i) {
        const double mid = lo > 0.0 ? std::sqrt(lo * hi) : 0.5 * hi;
        if (is_upper_bound(mid))
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

double resolvent_sup(const Mat& f) {
    const Mat id = Mat::Identity(f.rows(), f.cols());
    return hinf_norm(f, id, id);
}

bool is_positive_definite(const Mat& m, double tol) {
    const Eigen::VectorXd ev = symmetric_eigenvalues(m);
    return ev.size() == 0 || ev.minCoeff() > tol * tol_scale(ev);
}

bool is_positive_semidefinite(const Mat& m, double tol) {
    const Eigen::VectorXd ev = symmetric_eigenvalues(m);
    return ev.size() == 0 || ev.minCoeff() >= -tol * tol_scale(ev);
}

bool is_positive_semidefinite_wrt(const Mat& m, const Mat& kernel_basis, double tol) {
    const Eigen::VectorXd ev = symmetric_eigenvalues(m);
    if (kernel_basis.rows() != m.rows()) throw DimensionError(kModule, "kernel basis has wrong row count");
    const double thr = tol * tol_scale(ev);
    if (ev.size() && ev.minCoeff() < -thr) return false;
    const auto nullity = (ev.array().abs() <= thr).count();
    if (nullity != kernel_basis.cols()) return false;
    if (kernel_basis.cols() == 0) return true;
    // Kernel basis must actually be annihilated (columns normalized first).
    Mat kb = kernel_basis;
    for (Eigen::Index j = 0; j < kb.cols(); ++j) kb.col(j).normalize();
    return (m * kb).norm() <= thr * std::sqrt(static_cast<double>(kb.cols()));
}

Mat sqrtm_psd(const Mat& m) {
    require_square(m, "sqrtm_psd");
    if (m.size() == 0) return Mat();
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m));
    Vec ev = es.eigenvalues();
    const double maxabs = ev.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) < 0.0) {
            if (ev(i) < -1e-12 * maxabs)
                throw NumericalError(kModule, "matrix square root of an indefinite matrix");
            ev(i) = 0.0;
        }
    }
    return symmetrize(es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose());
}

}  // namespace convsync
