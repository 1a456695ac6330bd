#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "convsync/certificate.hpp"
#include "convsync/errors.hpp"
#include "convsync/matrix_algebra.hpp"
#include "oracles.hpp"

#include <random>

using namespace convsync;

namespace {

Certificate certify(const oracle::PlantedSystem& s) {
    return build_certificate(s.a11(), s.a12(), s.a21(), s.a22(), s.kernel);
}

SteadyState table1_state() {
    const NetworkSpec s = NetworkSpec::table1_ring();
    return recover_steady_state(solve_gamma_from_input(Vec::Constant(3, 16.5), s).gamma, s);
}

}  // namespace

TEST_CASE("certificate of planted systems") {
    std::mt19937_64 rng(31);
    int matched = 0;
    for (int t = 0; t < 20; ++t) {
        const auto sys = oracle::planted_system(2 + t % 3, 3 + t % 4, rng);
        const Certificate c = certify(sys);
        CHECK(c.valid());
        // The planted P2 solves the Riccati equation. It is the solution the
        // pipeline picks only when its closed loop is stable off the kernel.
        const Mat p2 = sys.p.bottomRightCorner(sys.n2, sys.n2);
        const Mat a21 = sys.a21();
        const CVec cl = eigenvalues(Mat(c.f + a21 * a21.transpose() * p2));
        int unstable = 0;
        for (Eigen::Index i = 0; i < cl.size(); ++i)
            if (cl(i).real() > 1e-8 * c.f.norm()) ++unstable;
        if (unstable == 0) {
            ++matched;
            CHECK((c.p - sys.p).norm() <= 1e-8 * sys.p.norm());
        }
        CHECK(c.p_min_eigenvalue > 0.0);
        CHECK(c.lyapunov_residual <= 1e-6 * c.jacobian.norm() * c.p.norm());
        CHECK(c.q_min_eigenvalue_perp > 0.0);
        CHECK(c.q_kernel_residual <= 1e-8 * c.q_of_p.norm());
        CHECK(c.are_stabilizing);
        CHECK(c.are_origin_residual <= 1e-8 * c.f.norm());
        CHECK(c.g_norm == doctest::Approx(1.0).epsilon(1e-4));
        CHECK((c.h_of_p - (c.jacobian.topRightCorner(sys.n1, sys.n2).transpose() * c.p1 +
                           c.p2 * c.jacobian.bottomLeftCorner(sys.n2, sys.n1)))
                  .norm() <= 1e-12 * (1.0 + c.h_of_p.norm()));
        CHECK(c.kernel.norm() == doctest::Approx(1.0));
    }
    CHECK(matched >= 10);
}

TEST_CASE("synthetic partitioned system without coupling back") {
    const Mat a11 = -Mat::Identity(2, 2);
    Mat a12 = Mat::Zero(2, 2);
    a12(0, 0) = 1.0;
    const Mat a21 = Mat::Zero(2, 2);
    const Mat a22 = -Mat::Identity(2, 2);
    const Vec p = Vec::Unit(4, 0);
    const Certificate c = build_certificate(a11, a12, a21, a22, p);
    CHECK((c.p1 - 0.5 * Mat::Identity(2, 2)).norm() <= 1e-14);
    CHECK(c.p_positive_definite);
}

TEST_CASE("Lyapunov function values") {
    std::mt19937_64 rng(8);
    const auto sys = oracle::planted_system(3, 5, rng);
    const Certificate c = certify(sys);
    REQUIRE(c.valid());
    const Vec& p = c.kernel;
    CHECK(std::abs(lyapunov_value(c, p)) <= 1e-12);
    CHECK(std::abs(lyapunov_derivative(c, p)) <= 1e-10);
    std::uniform_real_distribution<double> a(-10.0, 10.0);
    for (int i = 0; i < 5; ++i) CHECK(std::abs(lyapunov_value(c, a(rng) * p)) <= 1e-10);
    int checked = 0;
    for (int i = 0; i < 100; ++i) {
        Vec x = oracle::random_matrix(8, 1, rng);
        const Vec perp = x - x.dot(p) * p;
        if (perp.norm() < 1e-3) continue;
        ++checked;
        CHECK(lyapunov_value(c, x) > 0.0);
        CHECK(lyapunov_derivative(c, x) < 0.0);
        CHECK(lyapunov_value_projector(c, x) == doctest::Approx(lyapunov_value(c, x)).epsilon(1e-10));
        // direct derivative 2 x^T M J x with M the projected quadratic form
        const Vec pp = c.p * p;
        const Mat m = c.p - pp * pp.transpose() / p.dot(pp);
        CHECK(lyapunov_derivative(c, x) == doctest::Approx(2.0 * x.dot(m * (c.jacobian * x))).epsilon(1e-8));
    }
    CHECK(checked > 90);
}

TEST_CASE("assumption failures are named") {
    SUBCASE("A11 not Hurwitz") {
        const Mat a11 = Mat::Identity(2, 2);
        try {
            build_certificate(a11, Mat::Zero(2, 2), Mat::Zero(2, 2), Mat(-Mat::Identity(2, 2)), Vec::Ones(4));
            FAIL("expected an assumption error");
        } catch (const AssumptionError& e) {
            CHECK(e.assumption() == "a11-hurwitz");
            CHECK(e.measured() == doctest::Approx(1.0));
        }
    }
    SUBCASE("F not Hurwitz") {
        try {
            build_certificate(Mat(-Mat::Identity(2, 2)), Mat::Zero(2, 2), Mat::Zero(2, 2), Mat(Mat::Identity(2, 2)),
                              Vec::Ones(4));
            FAIL("expected an assumption error");
        } catch (const AssumptionError& e) {
            CHECK(e.assumption() == "small-gain");
        }
    }
    SUBCASE("gain above one") {
        std::mt19937_64 rng(2);
        auto sys = oracle::planted_system(2, 4, rng);
        Mat a21 = sys.a21() * 30.0;
        try {
            build_certificate(sys.a11(), sys.a12(), a21, sys.a22(), sys.kernel);
            FAIL("expected an assumption error");
        } catch (const AssumptionError& e) {
            CHECK(e.assumption() == "small-gain");
            // either the gain or the abscissa of F, both past their limit
            CHECK(e.measured() > 0.0);
        } catch (const NumericalError& e) {
            FAIL(e.what());
        }
    }
    SUBCASE("dimension errors") {
        CHECK_THROWS_AS(build_certificate(Mat(-Mat::Identity(2, 2)), Mat::Zero(2, 3), Mat::Zero(2, 2),
                                          Mat(-Mat::Identity(2, 2)), Vec::Ones(4)),
                        DimensionError);
    }
}

TEST_CASE("closed-form P1 agrees with the Lyapunov solution") {
    const NetworkSpec s = NetworkSpec::table1_ring();
    // Equal angles give equal positive Hessian entries and a Hurwitz A11.
    const SteadyState ss = recover_steady_state(Vec::Zero(3), s);
    const LinearizedSystem lin = jacobian(ss, s);
    REQUIRE(lin.hessian_u.diagonal().minCoeff() > 0.0);
    const Mat cf = closed_form_P1(lin, s.converter);
    const Mat lyap = solve_lyapunov(lin.A11, Mat::Identity(6, 6));
    CHECK((cf - lyap).norm() <= 1e-6 * lyap.norm());
    CHECK(is_positive_definite(cf));
}

TEST_CASE("closed-form P1 of a single converter by hand") {
    NetworkSpec s = NetworkSpec::table1_ring();
    s.n = 1;
    s.edges.clear();
    const SteadyState ss = recover_steady_state(Vec::Zero(1), s);
    const LinearizedSystem lin = jacobian(ss, s);
    const auto& c = s.converter;
    const double h = lin.hessian_u(0, 0);
    REQUIRE(h > 0.0);
    const Mat p1 = closed_form_P1(lin, c);
    const double one_plus = 1.0 + c.eta * c.c_dc / h;
    CHECK(p1(0, 0) == doctest::Approx((0.5 * c.k_p / h + h / (2 * c.k_p) * one_plus) / c.eta));
    CHECK(p1(0, 1) == doctest::Approx(0.5 * c.c_dc / h));
    CHECK(p1(1, 1) == doctest::Approx(c.c_dc / (2 * c.k_p) * one_plus));
    // scalar Lyapunov route
    const Mat a = (Mat(2, 2) << 0.0, c.eta, -h / c.c_dc, -c.k_p / c.c_dc).finished();
    CHECK((solve_lyapunov(a, Mat::Identity(2, 2)) - p1).norm() <= 1e-8 * p1.norm());
}

TEST_CASE("closed-form P1 is positive definite for positive Hessians") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int tested = 0;
    for (int t = 0; t < 200 && tested < 50; ++t) {
        NetworkSpec s = NetworkSpec::table1_ring();
        s.converter.eta = 1e-4 + 1e-3 * u(rng);
        s.converter.k_p = 0.02 + 0.2 * u(rng);
        const Vec g = 0.002 * (Vec(3) << u(rng), u(rng), u(rng)).finished();
        const SteadyState ss = recover_steady_state(g, s);
        const LinearizedSystem lin = jacobian(ss, s);
        if (lin.hessian_u.diagonal().minCoeff() <= 0.0) {
            CHECK_THROWS_AS(closed_form_P1(lin, s.converter), AssumptionError);
            continue;
        }
        ++tested;
        const Mat p1 = closed_form_P1(lin, s.converter);
        CHECK((p1 - p1.transpose()).norm() == 0.0);
        CHECK(is_positive_definite(p1));
        const Mat r = p1 * lin.A11 + lin.A11.transpose() * p1 + Mat::Identity(6, 6);
        CHECK(r.norm() <= 1e-6 * p1.norm() * lin.A11.norm());
    }
    CHECK(tested >= 10);
}

TEST_CASE("reference ring instance reports the failed assumption") {
    const NetworkSpec s = NetworkSpec::table1_ring();
    const SteadyState ss = table1_state();
    const LinearizedSystem lin = jacobian(ss, s);
    try {
        const Certificate c = build_certificate(lin);
        CHECK(c.valid());
    } catch (const AssumptionError& e) {
        MESSAGE("reference ring certificate: " << e.what());
        CHECK((e.assumption() == "a11-hurwitz" || e.assumption() == "small-gain"));
    }
}

TEST_CASE("certificate pipeline on an equal-angle network stops at the small-gain test") {
    const NetworkSpec s = NetworkSpec::table1_ring();
    const SteadyState ss = recover_steady_state(Vec::Zero(3), s);
    const LinearizedSystem lin = jacobian(ss, s);
    try {
        build_certificate(lin);
        FAIL("expected the small-gain test to fail");
    } catch (const AssumptionError& e) {
        CHECK(e.assumption() == "small-gain");
        CHECK(e.measured() > 1.0);
    }
}

TEST_CASE("Gamma diagnostic") {
    const NetworkSpec s = NetworkSpec::table1_ring();
    const SteadyState ss = recover_steady_state(Vec::Zero(3), s);
    const LinearizedSystem lin = jacobian(ss, s);
    const GammaDiagnostic d = gamma_diagnostic(lin, s);
    CHECK(d.gamma.rows() == 6);
    CHECK((d.gamma - d.gamma.transpose()).norm() == 0.0);
    CHECK(d.gamma_positive_definite == (d.gamma_min_eigenvalue > 0.0));
    CHECK(std::isfinite(d.pair_residual));
    const Mat p1 = solve_lyapunov(lin.A11, Mat::Identity(6, 6));
    CHECK(d.f_hurwitz == is_hurwitz(Mat(lin.A22 + lin.A21 * p1 * lin.A12)));
    // Not defined when A11 is not Hurwitz.
    CHECK_THROWS_AS(gamma_diagnostic(jacobian(table1_state(), s), s), NotHurwitzError);
}
