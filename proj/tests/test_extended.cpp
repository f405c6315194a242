#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "stokesext/extended_system.hpp"
#include "stokesext/manufactured.hpp"
#include "stokesext/norms.hpp"
#include "stokesext/verify.hpp"

using namespace stokesext;

TEST_CASE("stokes data validation") {
    CHECK_THROWS_AS(StokesData::stokes(1.0, VectorFn{}), std::invalid_argument);
    const StokesData d = StokesData::stokes(0.0, VectorFn{});
    CHECK(d.stokes_mode);
}

TEST_CASE("monolithic system: zero data gives the zero state") {
    const Mesh mesh = build_structured_mesh(4);
    const StokesSpaces spaces = make_spaces(mesh);
    const StokesData data = StokesData::stokes(0.5, VectorFn{});
    for (ZMode mode : {ZMode::interior_X0h, ZMode::full_Xh}) {
        const BlockSystem sys = assemble_monolithic(data, spaces, mode);
        CHECK(sys.matrix.rows() == sys.matrix.cols());
        const ExtendedState st = solve(sys);
        CHECK(st.u.coeffs.norm() == 0.0);
        CHECK(st.p.coeffs.norm() == 0.0);
        CHECK(st.z.coeffs.norm() == 0.0);
        CHECK(st.r.coeffs.norm() == 0.0);
        CHECK(st.t.coeffs.norm() == 0.0);
        CHECK(st.p_hat.coeffs.norm() == 0.0);
        CHECK(st.y.coeffs.norm() == 0.0);
    }
}

TEST_CASE("monolithic solvability over the (alpha, n) grid") {
    const ManufacturedCase mc = manufactured_stokes("stream4");
    for (int n : {4, 8, 16}) {
        const Mesh mesh = build_structured_mesh(n);
        const StokesSpaces spaces = make_spaces(mesh);
        for (double alpha : {-1.0, 0.0, 0.5, 2.0}) {
            const StokesData data = StokesData::stokes(alpha, mc.forcing);
            const BlockSystem sys = assemble_monolithic(data, spaces, ZMode::interior_X0h);
            CHECK(sys.matrix.rows() == sys.matrix.cols());
            CHECK_NOTHROW(solve(sys));  // residual contract enforced inside
        }
    }
}

TEST_CASE("monolithic matches reduced 3-block in (u, p)") {
    const ManufacturedCase mc = manufactured_stokes("stream4");
    const Mesh mesh = build_structured_mesh(8);
    const StokesSpaces spaces = make_spaces(mesh);
    const StokesData data = StokesData::stokes(0.0, mc.forcing);

    const ExtendedState mono = solve(assemble_monolithic(data, spaces, ZMode::interior_X0h));
    const ExtendedState red = solve(assemble_reduced_3block(data, spaces));

    CHECK((mono.u.coeffs - red.u.coeffs).lpNorm<Eigen::Infinity>() <= 1e-9);
    CHECK((mono.p.coeffs - red.p.coeffs).lpNorm<Eigen::Infinity>() <= 1e-9);
    CHECK((mono.z.coeffs - red.z.coeffs).lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("reduced 3-block") {
    const ManufacturedCase mc = manufactured_stokes("stream4");

    SECTION("zero forcing gives the zero solution") {
        const Mesh mesh = build_structured_mesh(6);
        const StokesSpaces spaces = make_spaces(mesh);
        const StokesData data = StokesData::stokes(0.0, VectorFn{});
        const ExtendedState st = solve(assemble_reduced_3block(data, spaces));
        CHECK(st.u.coeffs.norm() == 0.0);
        CHECK(st.p.coeffs.norm() == 0.0);
    }
    SECTION("non-stokes data rejected") {
        const Mesh mesh = build_structured_mesh(4);
        const StokesSpaces spaces = make_spaces(mesh);
        StokesData data;
        data.alpha = 0.0;
        data.f = mc.forcing;
        CHECK_THROWS_AS(assemble_reduced_3block(data, spaces), std::invalid_argument);
    }
    SECTION("divergence norm halves when n doubles (exact div u = 0)") {
        std::vector<double> div;
        for (int n : {8, 16}) {
            const Mesh mesh = build_structured_mesh(n);
            const StokesSpaces spaces = make_spaces(mesh);
            const StokesData data = StokesData::stokes(0.0, mc.forcing);
            const ExtendedState st = solve(assemble_reduced_3block(data, spaces));
            div.push_back(divergence_l2(st.u));
        }
        CHECK(div[0] / div[1] >= 1.6);
    }
    SECTION("smallest nontrivial interior (n=2) is solvable") {
        const Mesh mesh = build_structured_mesh(2);
        const StokesSpaces spaces = make_spaces(mesh);
        const StokesData data = StokesData::stokes(0.0, mc.forcing);
        CHECK_NOTHROW(solve(assemble_reduced_3block(data, spaces)));
    }
}

TEST_CASE("condensed 2-block") {
    const ManufacturedCase mc = manufactured_stokes("stream4");
    const Mesh mesh = build_structured_mesh(8);
    const StokesSpaces spaces = make_spaces(mesh);
    const StokesData data = StokesData::stokes(0.0, mc.forcing);
    const BlockSystem sys3 = assemble_reduced_3block(data, spaces);

    SECTION("agrees with the 3-block solve to 1e-9") {
        const ExtendedState s3 = solve(sys3);
        const ExtendedState s2 = solve(condense_2block(sys3));
        CHECK((s3.u.coeffs - s2.u.coeffs).lpNorm<Eigen::Infinity>() <= 1e-9);
        CHECK((s3.p.coeffs - s2.p.coeffs).lpNorm<Eigen::Infinity>() <= 1e-9);
    }
    SECTION("G_h(alpha) action is affine in alpha") {
        Vector u = Vector::Zero(sys3.A.rows());
        for (int i = 0; i < u.size(); ++i) u[i] = std::sin(0.17 * i + 0.3);
        const Vector g0 = gh_alpha_apply(sys3, 0.0, u);
        const Vector g1 = gh_alpha_apply(sys3, 1.0, u);
        const double alpha = -2.3;
        const Vector ga = gh_alpha_apply(sys3, alpha, u);
        const Vector affine = g0 + alpha * (g1 - g0);
        CHECK((ga - affine).lpNorm<Eigen::Infinity>() <=
              1e-12 * std::max(1.0, ga.lpNorm<Eigen::Infinity>()));
    }
    SECTION("zero velocity maps to zero") {
        const Vector g = gh_alpha_apply(sys3, 1.7, Vector::Zero(sys3.A.rows()));
        CHECK(g.norm() == 0.0);
    }
}

TEST_CASE("z-mode behavior") {
    const ManufacturedCase mc = manufactured_stokes("stream4");
    const Mesh mesh = build_structured_mesh(8);
    const StokesSpaces spaces = make_spaces(mesh);
    const StokesData data = StokesData::stokes(0.5, mc.forcing);

    SECTION("interior mode: z vanishes at boundary DOFs") {
        const ExtendedState st = solve(assemble_monolithic(data, spaces, ZMode::interior_X0h));
        for (int b : spaces.velocity.boundary_nodes) {
            CHECK(st.z.coeffs[spaces.velocity.dof(b, 0)] == 0.0);
            CHECK(st.z.coeffs[spaces.velocity.dof(b, 1)] == 0.0);
        }
    }
    SECTION("interior mode: z equals the discrete Laplacian of u") {
        const ExtendedState st = solve(assemble_monolithic(data, spaces, ZMode::interior_X0h));
        const Field xi = discrete_laplacian(st.u);
        CHECK((st.z.coeffs - xi.coeffs).lpNorm<Eigen::Infinity>() <=
              1e-9 * std::max(1.0, xi.coeffs.lpNorm<Eigen::Infinity>()));
    }
    SECTION("full mode: solvable, u error shrinks under refinement") {
        std::vector<double> errs;
        for (int n : {8, 16}) {
            const Mesh m = build_structured_mesh(n);
            const StokesSpaces sp = make_spaces(m);
            const ExtendedState st =
                solve(assemble_monolithic(StokesData::stokes(0.5, mc.forcing), sp, ZMode::full_Xh));
            errs.push_back(error_norms(st.u, mc.velocity, mc.velocity_grad).h1semi);
        }
        CHECK(errs[1] < errs[0]);
    }
}

TEST_CASE("recover_auxiliary completes the reduced solve") {
    const ManufacturedCase mc = manufactured_stokes("stream4");
    const Mesh mesh = build_structured_mesh(8);
    const StokesSpaces spaces = make_spaces(mesh);
    const StokesData data = StokesData::stokes(0.5, mc.forcing);
    const ExtendedState red = solve(assemble_reduced_3block(data, spaces));
    const ExtendedState full = recover_auxiliary(red.u, red.z, red.p, data, spaces);

    SECTION("r vanishes identically in stokes mode") {
        CHECK(full.r.coeffs.lpNorm<Eigen::Infinity>() <= 1e-12);
    }
    SECTION("t is the L2 projection of f") {
        const Field tf = l2_project(
            RhsFunctional::from_density(spaces.velocity, mc.forcing), spaces.velocity);
        CHECK((full.t.coeffs - tf.coeffs).lpNorm<Eigen::Infinity>() <= 1e-10);
    }
    SECTION("identity p - (q + p_hat) = 0 holds nodally") {
        const Vector res = full.p.coeffs - full.q.coeffs - full.p_hat.coeffs;
        CHECK(res.lpNorm<Eigen::Infinity>() <= 1e-10);
    }
    SECTION("p_S = p for stokes data") {
        CHECK((full.p_S.coeffs - full.p.coeffs).lpNorm<Eigen::Infinity>() <= 1e-10);
    }
    SECTION("all system equations satisfied to 1e-9") {
        const auto res = extended_residuals(full, data, spaces, ZMode::interior_X0h);
        for (const auto& [key, value] : res) {
            INFO(key << " = " << value);
            CHECK(value <= 1e-9);
        }
    }
    SECTION("recovered state agrees with the monolithic solve in every field") {
        const ExtendedState mono = solve(assemble_monolithic(data, spaces, ZMode::interior_X0h));
        CHECK((full.q.coeffs - mono.q.coeffs).lpNorm<Eigen::Infinity>() <= 1e-9);
        CHECK((full.q_hat.coeffs - mono.q_hat.coeffs).lpNorm<Eigen::Infinity>() <= 1e-9);
        CHECK((full.p_hat.coeffs - mono.p_hat.coeffs).lpNorm<Eigen::Infinity>() <= 1e-9);
        CHECK((full.y.coeffs - mono.y.coeffs).lpNorm<Eigen::Infinity>() <= 1e-9);
        CHECK((full.p_S.coeffs - mono.p_S.coeffs).lpNorm<Eigen::Infinity>() <= 1e-9);
        CHECK((full.r.coeffs - mono.r.coeffs).lpNorm<Eigen::Infinity>() <= 1e-9);
        CHECK((full.t.coeffs - mono.t.coeffs).lpNorm<Eigen::Infinity>() <= 1e-9);
    }
}

TEST_CASE("z-gradient orthogonality gap decreases under refinement") {
    const ManufacturedCase mc = manufactured_stokes("stream4");
    std::vector<double> gaps;
    for (int n : {8, 16}) {
        const Mesh mesh = build_structured_mesh(n);
        const StokesSpaces spaces = make_spaces(mesh);
        const StokesData data = StokesData::stokes(0.0, mc.forcing);
        const ExtendedState st = solve(assemble_reduced_3block(data, spaces));
        gaps.push_back(z_gradient_orthogonality_gap(st.z, spaces));
    }
    CHECK(gaps[0] > 0.0);
    CHECK(gaps[1] < gaps[0]);
}
