#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "stokesext/norms.hpp"
#include "stokesext/space.hpp"

using namespace stokesext;
namespace {
constexpr double pi = std::numbers::pi;
}

TEST_CASE("P1 space dof structure") {
    SECTION("n=2 scalar: 9 DOFs, 1 interior") {
        const Mesh m = build_structured_mesh(2);
        const FeSpace s = build_p1_space(m, 1);
        CHECK(s.n_dofs() == 9);
        CHECK(s.n_interior_nodes() == 1);
        CHECK(s.n_boundary_nodes() == 8);
    }
    SECTION("n=2 vector: 18 DOFs") {
        const Mesh m = build_structured_mesh(2);
        const FeSpace s = build_p1_space(m, 2);
        CHECK(s.n_dofs() == 18);
        CHECK(s.n_interior_dofs() == 2);
    }
    SECTION("n=1: empty interior") {
        const Mesh m = build_structured_mesh(1);
        const FeSpace s = build_p1_space(m, 1);
        CHECK(s.interior_nodes.empty());
    }
    SECTION("interior and boundary partition all dofs") {
        const Mesh m = build_structured_mesh(5);
        const FeSpace s = build_p1_space(m, 1);
        CHECK(s.n_interior_nodes() + s.n_boundary_nodes() == s.n_nodes());
        for (int i = 0; i < s.n_nodes(); ++i) {
            const bool in = s.interior_pos[i] >= 0;
            const bool bd = s.boundary_pos[i] >= 0;
            CHECK(in != bd);
        }
    }
}

TEST_CASE("zero mean constraint") {
    const Mesh m = build_structured_mesh(4);
    const FeSpace s = build_p1_space(m, 1);
    const ZeroMeanConstraint z = zero_mean_constraint(s);

    SECTION("weights integrate the constant 1 to the domain measure") {
        CHECK(z.weights.sum() == Catch::Approx(1.0).epsilon(1e-12));
        CHECK(z.domain_measure == Catch::Approx(1.0).epsilon(1e-12));
    }
    SECTION("all weights positive for P1") {
        for (int i = 0; i < z.weights.size(); ++i) CHECK(z.weights[i] > 0.0);
    }
    SECTION("w-pairing of the constant field is the measure") {
        const Field one = interpolate(s, ScalarFn([](const Vec2&) { return 1.0; }));
        CHECK(z.mean_defect(one.coeffs) == Catch::Approx(1.0).epsilon(1e-12));
    }
    SECTION("sin(2 pi x) interpolant has near-zero weighted mean") {
        const Mesh m32 = build_structured_mesh(32);
        const FeSpace s32 = build_p1_space(m32, 1);
        const ZeroMeanConstraint z32 = zero_mean_constraint(s32);
        const Field f =
            interpolate(s32, ScalarFn([](const Vec2& p) { return std::sin(2.0 * pi * p.x); }));
        CHECK(std::abs(z32.mean_defect(f.coeffs)) <= 1e-3);
    }
    SECTION("projection removes the weighted mean exactly") {
        Field f = interpolate(s, ScalarFn([](const Vec2& p) { return p.x * p.x + 3.0; }));
        const Vector proj = z.project(f.coeffs);
        CHECK(std::abs(z.weights.dot(proj)) <= 1e-14);
    }
    SECTION("vector space rejected") {
        const FeSpace v = build_p1_space(m, 2);
        CHECK_THROWS_AS(zero_mean_constraint(v), std::invalid_argument);
    }
}

TEST_CASE("interpolation") {
    const Mesh m = build_structured_mesh(4);
    const FeSpace s = build_p1_space(m, 1);

    SECTION("constants reproduced exactly") {
        const Field f = interpolate(s, ScalarFn([](const Vec2&) { return 2.5; }));
        for (int i = 0; i < s.n_dofs(); ++i) CHECK(f.coeffs[i] == 2.5);
    }
    SECTION("linears reproduced exactly: H1 error at roundoff") {
        const ScalarFn lin = [](const Vec2& p) { return p.x + p.y; };
        const VectorFn lin_grad = [](const Vec2&) { return Vec2{1.0, 1.0}; };
        const Field f = interpolate(s, lin);
        const ErrorNorms e = error_norms(f, lin, lin_grad);
        CHECK(e.l2 <= 1e-13);
        CHECK(e.h1semi <= 1e-13);
    }
    SECTION("interpolating a P1 function is the identity on coefficients") {
        Field g(s);
        for (int i = 0; i < s.n_dofs(); ++i) g.coeffs[i] = std::cos(1.0 + 0.37 * i);
        const Field f = interpolate(s, ScalarFn([&](const Vec2& p) { return g.eval(p); }));
        CHECK((f.coeffs - g.coeffs).lpNorm<Eigen::Infinity>() <= 1e-13);
    }
    SECTION("H1 interpolation order ~ 1 on sin(pi x) sin(pi y)") {
        const ScalarFn f = [](const Vec2& p) { return std::sin(pi * p.x) * std::sin(pi * p.y); };
        const VectorFn fg = [](const Vec2& p) {
            return Vec2{pi * std::cos(pi * p.x) * std::sin(pi * p.y),
                        pi * std::sin(pi * p.x) * std::cos(pi * p.y)};
        };
        std::vector<double> errs;
        for (int n : {8, 16, 32}) {
            const Mesh mn = build_structured_mesh(n);
            const FeSpace sn = build_p1_space(mn, 1);
            errs.push_back(error_norms(interpolate(sn, f), f, fg).h1semi);
        }
        const double rate = std::log2(errs[1] / errs[2]);
        CHECK(rate >= 0.9);
        CHECK(rate <= 1.1);
    }
}

TEST_CASE("field point evaluation matches nodal data") {
    const Mesh m = build_structured_mesh(3);
    const FeSpace s = build_p1_space(m, 2);
    const VectorFn f = [](const Vec2& p) { return Vec2{p.x * 2.0 - p.y, 0.5 * p.y + p.x}; };
    const Field fld = interpolate(s, f);
    // linear functions are reproduced pointwise by P1
    const Vec2 q{0.42, 0.77};
    CHECK(fld.eval(q, 0) == Catch::Approx(f(q).x).margin(1e-13));
    CHECK(fld.eval(q, 1) == Catch::Approx(f(q).y).margin(1e-13));
}
