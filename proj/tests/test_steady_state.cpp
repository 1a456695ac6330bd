#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "convsync/errors.hpp"
#include "convsync/steady_state.hpp"
#include "oracles.hpp"

#include <complex>
#include <numbers>
#include <random>

using namespace convsync;

namespace {

NetworkSpec lone() {
    NetworkSpec s = NetworkSpec::table1_ring();
    s.n = 1;
    s.edges.clear();
    return s;
}

/// Inverse of a rotation-commuting 2x2 block [a -b; b a] through a + jb.
Mat2 block_inverse(const Mat2& m) {
    const std::complex<double> w = 1.0 / std::complex<double>(m(0, 0), m(1, 0));
    Mat2 r;
    r << w.real(), -w.imag(), w.imag(), w.real();
    return r;
}

}  // namespace

TEST_CASE("admittance of a lone converter") {
    const NetworkSpec s = lone();
    const auto& c = s.converter;
    const double w = c.omega_star;
    Mat2 zr, zc;
    zr << c.r_f, -c.l_f * w, c.l_f * w, c.r_f;
    zc << c.g_load, -c.c_f * w, c.c_f * w, c.g_load;
    const Mat2 expect = block_inverse(zr + block_inverse(zc));
    const Mat y = admittance(s);
    REQUIRE(y.rows() == 2);
    CHECK((y - expect).norm() <= 1e-12 * expect.norm());
}

TEST_CASE("admittance of the ring commutes with rotations") {
    const Mat y = admittance(NetworkSpec::table1_ring());
    REQUIRE(y.rows() == 6);
    for (double th : {0.3, 1.7, -2.4}) {
        const Mat r = block_rotation(3, th);
        CHECK((y * r - r * y).norm() <= 1e-12 * y.norm());
    }
}

TEST_CASE("admittance without lines is block diagonal with equal blocks") {
    NetworkSpec s = NetworkSpec::table1_ring();
    s.edges.clear();
    const Mat y = admittance(s);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            const Mat blk = y.block(2 * a, 2 * b, 2, 2);
            if (a == b)
                CHECK((blk - y.block(0, 0, 2, 2)).norm() == 0.0);
            else
                CHECK(blk.norm() == 0.0);
        }
}

TEST_CASE("feasible input of a lone converter") {
    const NetworkSpec s = lone();
    const double xi = s.converter.mu * s.converter.mu * s.converter.v_dc_star / 4.0;
    const Mat y = admittance(s);
    const Vec2 r = rotation_vector(0.0);
    const double expect = xi * r.dot(y * r);
    const Vec u = feasible_input(Vec::Zero(1), s);
    CHECK(u(0) == doctest::Approx(expect).epsilon(1e-13));
    CHECK(electrical_power(u, s)(0) == doctest::Approx(s.converter.v_dc_star * u(0)));
}

TEST_CASE("equal angles on the ring give equal inputs") {
    const Vec u = feasible_input(Vec::Constant(3, 0.37), NetworkSpec::table1_ring());
    CHECK(u(1) == doctest::Approx(u(0)).epsilon(1e-12));
    CHECK(u(2) == doctest::Approx(u(0)).epsilon(1e-12));
}

TEST_CASE("feasible input is invariant under a common angle shift") {
    const NetworkSpec s = NetworkSpec::table1_ring();
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> a(-3.0, 3.0);
    for (int t = 0; t < 20; ++t) {
        const Vec g = (Vec(3) << a(rng), a(rng), a(rng)).finished();
        const double th = a(rng);
        const Vec u0 = feasible_input(g, s);
        const Vec u1 = feasible_input((g.array() + th).matrix(), s);
        CHECK((u0 - u1).norm() <= 1e-11 * (1.0 + u0.norm()));
    }
}

TEST_CASE("recovered steady state is an equilibrium") {
    const NetworkSpec s = NetworkSpec::table1_ring();
    const SteadyState ss = recover_steady_state((Vec(3) << 0.1, 0.2, -0.05).finished(), s);
    const Network net(s);
    CHECK(net(ss.z_star, ss.u_star).norm() <= 1e-9 * (1.0 + ss.z_star.norm()));
    CHECK(ss.xi == doctest::Approx(0.33 * 0.33 * 1000.0 / 4.0));
    CHECK(ss.z_star.segment(3, 3).isApproxToConstant(1000.0));
    // i* = (mu/2) Y Rot v_dc* 1
    const Vec i = 0.5 * 0.33 * ss.admittance_Y * rot_matrix(ss.gamma_star) * Vec::Constant(3, 1000.0);
    CHECK((ss.i_star() - i).norm() <= 1e-12 * i.norm());
}

TEST_CASE("steady state without lines") {
    NetworkSpec s = NetworkSpec::table1_ring();
    s.edges.clear();
    const SteadyState ss = recover_steady_state((Vec(3) << 0.1, 0.2, -0.05).finished(), s);
    const StateLayout& L = ss.layout;
    CHECK(L.m == 0);
    CHECK(ss.z_star.size() == 18);
    const Mat zc = impedances(s).z_c;
    const Vec v = ss.z_star.segment(L.v_c(), 6);
    CHECK((zc * v - ss.i_star()).norm() <= 1e-12 * ss.i_star().norm());
}

TEST_CASE("steady states along the orbit are related by the symmetry") {
    const NetworkSpec s = NetworkSpec::table1_ring();
    const Vec g = (Vec(3) << 0.1, 0.2, -0.05).finished();
    const SteadyState ss = recover_steady_state(g, s);
    for (double th : {0.4, -2.2, 3.0}) {
        const SteadyState sh = recover_steady_state((g.array() + th).matrix(), s);
        const Vec expect = apply_symmetry(ss.z_star, th, ss.layout);
        CHECK((sh.z_star - expect).norm() <= 1e-10 * (1.0 + expect.norm()));
    }
}

TEST_CASE("orbit points") {
    const NetworkSpec s = NetworkSpec::table1_ring();
    const SteadyState ss = recover_steady_state((Vec(3) << 0.1, 0.2, -0.05).finished(), s);
    const Network net(s);
    CHECK((orbit_point(ss, 0.0) - ss.z_star).norm() == 0.0);
    for (int i = 0; i < 32; ++i) {
        const Vec z = orbit_point(ss, 2.0 * std::numbers::pi * i / 32);
        CHECK(net(z, ss.u_star).norm() <= 1e-9 * (1.0 + ss.z_star.norm()));
    }
    const Vec a = orbit_point(ss, 0.8), b = orbit_point(ss, 0.8 + 2.0 * std::numbers::pi);
    const int ac = ss.layout.ac();
    CHECK((a.tail(a.size() - ac) - b.tail(b.size() - ac)).norm() <= 1e-12 * a.norm());
    CHECK((b.head(3) - a.head(3)).isApproxToConstant(2.0 * std::numbers::pi, 1e-12));
}

TEST_CASE("distance to the orbit") {
    const NetworkSpec s = NetworkSpec::table1_ring();
    const SteadyState ss = recover_steady_state((Vec(3) << 0.1, 0.2, -0.05).finished(), s);

    const OrbitDistance d = distance_to_orbit(orbit_point(ss, 1.3), ss);
    CHECK(d.distance <= 1e-8);
    CHECK(d.theta_min == doctest::Approx(1.3).epsilon(1e-8));

    for (double delta : {0.01, -0.5, 2.0}) {
        Vec z = ss.z_star;
        z(0) += delta;
        CHECK(distance_to_orbit(z, ss).distance <= std::abs(delta) + 1e-12);
    }

    // Dense grid oracle over theta.
    std::mt19937_64 rng(9);
    const StateLayout& L = ss.layout;
    for (int t = 0; t < 20; ++t) {
        Vec z = orbit_point(ss, 6.0 * std::uniform_real_distribution<double>(0, 1)(rng));
        z += 3.0 * oracle::random_matrix(L.size(), 1, rng);
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 100000; ++i) {
            const double th = 2.0 * std::numbers::pi * i / 100000;
            const Vec o = orbit_point(ss, th);
            Vec diff = z - o;
            for (int k = 0; k < L.n; ++k) diff(k) = wrap_angle(diff(k));
            best = std::min(best, diff.norm());
        }
        CHECK(distance_to_orbit(z, ss).distance == doctest::Approx(best).epsilon(1e-6));
    }
}

TEST_CASE("distance is positive off the orbit and honours weights") {
    const NetworkSpec s = NetworkSpec::table1_ring();
    const SteadyState ss = recover_steady_state((Vec(3) << 0.1, 0.2, -0.05).finished(), s);
    const StateLayout& L = ss.layout;
    // orbit tangent [1; 0; J x*]; take the complement
    Vec tangent = Vec::Zero(L.size());
    tangent.head(L.n).setOnes();
    tangent.tail(L.ac_size()) = j_matrix(L.ac_size() / 2) * ss.x_star();
    std::mt19937_64 rng(4);
    for (int t = 0; t < 10; ++t) {
        Vec e = oracle::random_matrix(L.size(), 1, rng);
        e -= e.dot(tangent) / tangent.squaredNorm() * tangent;
        e.normalize();
        CHECK(distance_to_orbit(ss.z_star + 1e-3 * e, ss).distance > 0.0);
    }
    Vec z = ss.z_star;
    z(L.v_dc()) += 2.0;
    Vec w = Vec::Ones(L.size());
    CHECK(distance_to_orbit(z, ss, w).distance == doctest::Approx(2.0));
    w(L.v_dc()) = 4.0;
    CHECK(distance_to_orbit(z, ss, w).distance == doctest::Approx(4.0));
}

TEST_CASE("wrap angle") {
    CHECK(wrap_angle(0.0) == 0.0);
    CHECK(wrap_angle(std::numbers::pi) == doctest::Approx(std::numbers::pi));
    CHECK(wrap_angle(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
    CHECK(wrap_angle(3 * std::numbers::pi / 2) == doctest::Approx(-std::numbers::pi / 2));
}

TEST_CASE("angles from inputs") {
    const NetworkSpec s = NetworkSpec::table1_ring();
    SUBCASE("feasible target is recovered exactly") {
        const Vec g = (Vec(3) << 0.0, 0.25, -0.1).finished();
        const Vec u = feasible_input(g, s);
        const GammaSolveResult r = solve_gamma_from_input(u, s);
        REQUIRE(r.converged);
        CHECK((feasible_input(r.gamma, s) - u).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, u.cwiseAbs().maxCoeff()));
        CHECK(r.gamma(0) == 0.0);
        CHECK(std::abs(r.slack_mismatch) <= 1e-8);
    }
    SUBCASE("node indices are validated") {
        GammaSolveOptions o;
        o.slack = 3;
        CHECK_THROWS_AS(solve_gamma_from_input(Vec::Constant(3, 16.5), s, o), InvalidSpecError);
    }
    SUBCASE("reference input with node 1 as slack") {
        const GammaSolveResult r = solve_gamma_from_input(Vec::Constant(3, 16.5), s);
        REQUIRE(r.converged);
        CHECK(r.gamma(0) == 0.0);
        CHECK(r.input(1) == doctest::Approx(16.5).epsilon(1e-10));
        CHECK(r.input(2) == doctest::Approx(16.5).epsilon(1e-10));
        CHECK(r.slack_mismatch == doctest::Approx(r.input(0) - 16.5));
        const SteadyState ss = recover_steady_state(r.gamma, s);
        CHECK(Network(s)(ss.z_star, ss.u_star).norm() <= 1e-9 * (1.0 + ss.z_star.norm()));
    }
}
