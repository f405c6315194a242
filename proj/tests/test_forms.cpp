#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

#include "stokesext/assemble.hpp"

using namespace stokesext;

namespace {

Mesh reference_triangle_mesh() {
    Mesh m;
    m.nodes = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
    m.triangles = {{0, 1, 2}};
    m.boundary_nodes = {0, 1, 2};
    m.h = std::sqrt(2.0);
    m.finalize();
    return m;
}

}  // namespace

TEST_CASE("element stiffness and mass on the reference triangle") {
    const Mesh m = reference_triangle_mesh();
    const FeSpace s = build_p1_space(m, 1);

    SECTION("stiffness matches the hand-integrated matrix") {
        const Eigen::MatrixXd k = Eigen::MatrixXd(assemble_stiffness(s).mat);
        Eigen::Matrix3d expect;
        expect << 1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5;
        CHECK((k - expect).lpNorm<Eigen::Infinity>() <= 1e-14);
    }
    SECTION("mass matches (1/24) [[2,1,1],[1,2,1],[1,1,2]]") {
        const Eigen::MatrixXd mm = Eigen::MatrixXd(assemble_mass(s).mat);
        Eigen::Matrix3d expect;
        expect << 2.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 2.0;
        expect /= 24.0;
        CHECK((mm - expect).lpNorm<Eigen::Infinity>() <= 1e-15);
    }
}

TEST_CASE("global stiffness properties") {
    const Mesh m = build_structured_mesh(4);
    const FeSpace s = build_p1_space(m, 1);
    const SparseOperator a = assemble_stiffness(s);

    SECTION("row sums vanish (constants in the kernel)") {
        const Vector ones = Vector::Ones(s.n_dofs());
        CHECK((a.mat * ones).lpNorm<Eigen::Infinity>() <= 1e-13);
    }
    SECTION("symmetry") {
        const SpMat diff = SpMat(a.mat - SpMat(a.mat.transpose()));
        double max_abs = 0.0;
        for (int j = 0; j < diff.outerSize(); ++j)
            for (SpMat::InnerIterator it(diff, j); it; ++it)
                max_abs = std::max(max_abs, std::abs(it.value()));
        CHECK(max_abs <= 1e-13);
    }
    SECTION("n=2 interior restriction is the 1x1 matrix [4]") {
        const Mesh m2 = build_structured_mesh(2);
        const FeSpace s2 = build_p1_space(m2, 1);
        const SparseOperator a0 = assemble_stiffness(s2, Restrict::interior);
        REQUIRE(a0.rows() == 1);
        REQUIRE(a0.cols() == 1);
        CHECK(a0.mat.coeff(0, 0) == Catch::Approx(4.0).epsilon(1e-14));
    }
}

TEST_CASE("global mass properties") {
    const Mesh m = build_structured_mesh(4);
    const FeSpace s = build_p1_space(m, 1);
    const SparseOperator mm = assemble_mass(s);

    SECTION("entry total equals the domain measure") {
        const Vector ones = Vector::Ones(s.n_dofs());
        CHECK(ones.dot(mm.mat * ones) == Catch::Approx(1.0).epsilon(1e-13));
    }
    SECTION("SPD: smallest eigenvalue positive (dense eigensolve at tiny size)") {
        const Eigen::MatrixXd dense = Eigen::MatrixXd(mm.mat);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
        CHECK(es.eigenvalues().minCoeff() > 0.0);
    }
}

TEST_CASE("helmholtz operator") {
    const Mesh m = build_structured_mesh(4);
    const FeSpace s = build_p1_space(m, 1);

    SECTION("equals stiffness + mass entrywise") {
        const SpMat h = assemble_helmholtz(s).mat;
        const SpMat sum = SpMat(assemble_stiffness(s).mat + assemble_mass(s).mat);
        const SpMat diff = SpMat(h - sum);
        double max_abs = 0.0;
        for (int j = 0; j < diff.outerSize(); ++j)
            for (SpMat::InnerIterator it(diff, j); it; ++it)
                max_abs = std::max(max_abs, std::abs(it.value()));
        CHECK(max_abs <= 1e-14);
    }
    SECTION("SPD on n=4") {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(assemble_helmholtz(s).mat));
        CHECK(es.eigenvalues().minCoeff() > 0.0);
    }
}

TEST_CASE("div and grad couplings") {
    const Mesh m = build_structured_mesh(4);
    const FeSpace vel = build_p1_space(m, 2);
    const FeSpace sca = build_p1_space(m, 1);
    const SparseOperator b = assemble_div_coupling(vel, sca);

    SECTION("shape: interior velocity rows, full scalar cols") {
        CHECK(b.rows() == vel.n_interior_dofs());
        CHECK(b.cols() == sca.n_dofs());
    }
    SECTION("constant pressure pairs to zero with zero-trace velocities") {
        const Vector ones = Vector::Ones(sca.n_dofs());
        CHECK((b.mat * ones).lpNorm<Eigen::Infinity>() <= 1e-13);
    }
    SECTION("zero field gives zero pairing") {
        CHECK((b.mat * Vector::Zero(sca.n_dofs())).norm() == 0.0);
    }
    SECTION("discrete Green identity: B = -C^T on interior velocity columns") {
        // (p, div w) = -(grad p, w) for zero-trace w; columns of the full-row
        // grad coupling restricted to interior velocity DOFs
        const SparseOperator c = assemble_grad_coupling(vel, sca, Restrict::full);
        const SpMat c_cols =
            detail::select(c.mat, [&] {
                std::vector<int> rows(static_cast<std::size_t>(sca.n_dofs()));
                for (int i = 0; i < sca.n_dofs(); ++i) rows[static_cast<std::size_t>(i)] = i;
                return rows;
            }(), detail::restricted_dofs(vel, Restrict::interior));
        const SpMat diff = SpMat(b.mat + SpMat(c_cols.transpose()));
        double max_abs = 0.0;
        for (int j = 0; j < diff.outerSize(); ++j)
            for (SpMat::InnerIterator it(diff, j); it; ++it)
                max_abs = std::max(max_abs, std::abs(it.value()));
        CHECK(max_abs <= 1e-13);
    }
    SECTION("constant vector field against interior tests integrates to zero") {
        const SparseOperator ci = assemble_grad_coupling(vel, sca, Restrict::interior);
        Vector const_field(vel.n_dofs());
        const_field.head(sca.n_dofs()).setOnes();   // x-component 1
        const_field.tail(sca.n_dofs()).setZero();   // y-component 0
        CHECK((ci.mat * const_field).lpNorm<Eigen::Infinity>() <= 1e-13);
    }
    SECTION("interior and boundary row counts partition the scalar space") {
        const SparseOperator ci = assemble_grad_coupling(vel, sca, Restrict::interior);
        const SparseOperator cb = assemble_grad_coupling(vel, sca, Restrict::boundary);
        CHECK(ci.rows() + cb.rows() == sca.n_dofs());
    }
    SECTION("mesh mismatch rejected") {
        const Mesh m2 = build_structured_mesh(2);
        const FeSpace sca2 = build_p1_space(m2, 1);
        CHECK_THROWS_AS(assemble_div_coupling(vel, sca2), std::invalid_argument);
    }
}

TEST_CASE("scaling of assembled operators under mesh dilation") {
    // in 2D the stiffness is scale invariant and the mass scales by s^2
    Mesh m = build_structured_mesh(3);
    const FeSpace s = build_p1_space(m, 1);
    const SpMat a = assemble_stiffness(s).mat;
    const SpMat mm = assemble_mass(s).mat;

    Mesh scaled = m;
    const double sf = 2.75;
    for (Vec2& v : scaled.nodes) v = v * sf;
    const FeSpace ss = build_p1_space(scaled, 1);
    const SpMat as = assemble_stiffness(ss).mat;
    const SpMat ms = assemble_mass(ss).mat;

    CHECK((Eigen::MatrixXd(as) - Eigen::MatrixXd(a)).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK((Eigen::MatrixXd(ms) - sf * sf * Eigen::MatrixXd(mm)).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("load vector quadrature is exact to degree 2") {
    const Mesh m = build_structured_mesh(3);
    const FeSpace s = build_p1_space(m, 1);
    // for f in P1, <f, phi_i> must equal (M fbar)_i exactly
    const ScalarFn f = [](const Vec2& p) { return 2.0 * p.x - 0.5 * p.y + 1.0; };
    const Vector load = assemble_load(s, f);
    const Vector via_mass = assemble_mass(s).mat * interpolate(s, f).coeffs;
    CHECK((load - via_mass).lpNorm<Eigen::Infinity>() <= 1e-14);
}

TEST_CASE("matrix text dump") {
    const Mesh m = build_structured_mesh(2);
    const FeSpace s = build_p1_space(m, 1);
    const SparseOperator a = assemble_stiffness(s);
    std::stringstream ss;
    write_matrix(a.mat, ss);
    int rows = 0, cols = 0;
    long nnz = 0;
    ss >> rows >> cols >> nnz;
    CHECK(rows == 9);
    CHECK(cols == 9);
    CHECK(nnz == a.mat.nonZeros());
    int i = 0, j = 0;
    double v = 0.0;
    long count = 0;
    while (ss >> i >> j >> v) ++count;
    CHECK(count == nnz);
}
