#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <sstream>

#include "stokesext/mesh.hpp"
#include "stokesext/quadrature.hpp"

using namespace stokesext;

TEST_CASE("structured mesh counts") {
    SECTION("n=1: smallest mesh, all nodes on the boundary") {
        const Mesh m = build_structured_mesh(1);
        CHECK(m.n_nodes() == 4);
        CHECK(m.n_triangles() == 2);
        CHECK(m.boundary_nodes.size() == 4);
    }
    SECTION("n=2: 3x3 grid") {
        const Mesh m = build_structured_mesh(2);
        CHECK(m.n_nodes() == 9);
        CHECK(m.n_triangles() == 8);
        CHECK(m.boundary_nodes.size() == 8);
        int interior = 0;
        for (int i = 0; i < m.n_nodes(); ++i)
            if (!m.is_boundary_node(i)) ++interior;
        CHECK(interior == 1);
    }
    SECTION("invalid resolution") { CHECK_THROWS_AS(build_structured_mesh(0), std::invalid_argument); }
}

TEST_CASE("structured mesh geometry") {
    SECTION("total area tiles the unit square") {
        const Mesh m = build_structured_mesh(4);
        CHECK(mesh_total_area(m) == Catch::Approx(1.0).epsilon(1e-12));
    }
    SECTION("h = sqrt(2)/n and halves when n doubles") {
        const Mesh m8 = build_structured_mesh(8);
        const Mesh m16 = build_structured_mesh(16);
        CHECK(m8.h == Catch::Approx(std::sqrt(2.0) / 8.0).epsilon(1e-14));
        CHECK(m8.h / m16.h == Catch::Approx(2.0).epsilon(1e-14));
    }
    SECTION("all triangles positively oriented") {
        const Mesh m = build_structured_mesh(5);
        for (int t = 0; t < m.n_triangles(); ++t) CHECK(element_geometry(m, t).area > 0.0);
    }
}

TEST_CASE("boundary detection: topological equals geometric") {
    const Mesh m = build_structured_mesh(6);
    const std::vector<int> topo = boundary_nodes_topological(m);
    CHECK(topo == m.boundary_nodes);
}

TEST_CASE("element geometry") {
    // reference triangle embedded as mesh 0 of n=1: nodes (0,0),(1,0),(1,1)
    Mesh m;
    m.nodes = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
    m.triangles = {{0, 1, 2}};
    m.boundary_nodes = {0, 1, 2};
    m.finalize();

    SECTION("reference triangle: area and P1 gradients") {
        const ElementGeometry g = element_geometry(m, 0);
        CHECK(g.area == Catch::Approx(0.5).epsilon(1e-15));
        CHECK(g.grad_bary[0].x == Catch::Approx(-1.0));
        CHECK(g.grad_bary[0].y == Catch::Approx(-1.0));
        CHECK(g.grad_bary[1].x == Catch::Approx(1.0));
        CHECK(g.grad_bary[1].y == Catch::Approx(0.0).margin(1e-15));
        CHECK(g.grad_bary[2].x == Catch::Approx(0.0).margin(1e-15));
        CHECK(g.grad_bary[2].y == Catch::Approx(1.0));
    }
    SECTION("gradients sum to zero (differentiated partition of unity)") {
        const ElementGeometry g = element_geometry(m, 0);
        CHECK(g.grad_bary[0].x + g.grad_bary[1].x + g.grad_bary[2].x == Catch::Approx(0.0).margin(1e-14));
        CHECK(g.grad_bary[0].y + g.grad_bary[1].y + g.grad_bary[2].y == Catch::Approx(0.0).margin(1e-14));
    }
    SECTION("uniform scaling: area by s^2, gradients by 1/s") {
        const double s = 3.5;
        Mesh ms = m;
        for (Vec2& v : ms.nodes) v = v * s;
        const ElementGeometry g0 = element_geometry(m, 0);
        const ElementGeometry gs = element_geometry(ms, 0);
        CHECK(gs.area == Catch::Approx(s * s * g0.area).epsilon(1e-14));
        for (int k = 0; k < 3; ++k) {
            CHECK(gs.grad_bary[k].x == Catch::Approx(g0.grad_bary[k].x / s).margin(1e-14));
            CHECK(gs.grad_bary[k].y == Catch::Approx(g0.grad_bary[k].y / s).margin(1e-14));
        }
    }
    SECTION("index out of range") { CHECK_THROWS_AS(element_geometry(m, 1), std::out_of_range); }
}

TEST_CASE("mesh file round trip") {
    const Mesh m = build_structured_mesh(3);
    std::stringstream ss;
    write_mesh(m, ss);
    const Mesh back = read_mesh(ss);
    REQUIRE(back.n_nodes() == m.n_nodes());
    REQUIRE(back.n_triangles() == m.n_triangles());
    CHECK(back.boundary_nodes == m.boundary_nodes);
    CHECK(back.h == Catch::Approx(m.h).epsilon(1e-14));
    for (int i = 0; i < m.n_nodes(); ++i) {
        CHECK(back.nodes[i].x == m.nodes[i].x);
        CHECK(back.nodes[i].y == m.nodes[i].y);
    }
}

TEST_CASE("point location on structured meshes") {
    const Mesh m = build_structured_mesh(4);
    std::array<double, 3> b{};
    const int t = locate_point(m, {0.3, 0.7}, b);
    REQUIRE(t >= 0);
    const Vec2 back = barycentric_point(m, t, b);
    CHECK(back.x == Catch::Approx(0.3).margin(1e-13));
    CHECK(back.y == Catch::Approx(0.7).margin(1e-13));
}
