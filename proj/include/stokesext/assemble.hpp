#pragma once

#include <Eigen/Sparse>

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stokesext/space.hpp"

namespace stokesext {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

enum class Restrict { full, interior, boundary };

/// Assembled bilinear form. Row/col tags record which DOF subset each side
/// ranges over (full nodal set, interior nodes, or boundary nodes).
struct SparseOperator {
    SpMat mat;
    const FeSpace* row_space = nullptr;
    const FeSpace* col_space = nullptr;
    Restrict row_restrict = Restrict::full;
    Restrict col_restrict = Restrict::full;

    int rows() const { return static_cast<int>(mat.rows()); }
    int cols() const { return static_cast<int>(mat.cols()); }
};

namespace detail {

/// Full DOF indices of the restricted set, in restricted order (component-blocked).
inline std::vector<int> restricted_dofs(const FeSpace& s, Restrict r) {
    std::vector<int> out;
    const std::vector<int>* nodes = nullptr;
    switch (r) {
        case Restrict::full:
            out.resize(static_cast<std::size_t>(s.n_dofs()));
            for (int i = 0; i < s.n_dofs(); ++i) out[static_cast<std::size_t>(i)] = i;
            return out;
        case Restrict::interior: nodes = &s.interior_nodes; break;
        case Restrict::boundary: nodes = &s.boundary_nodes; break;
    }
    out.reserve(static_cast<std::size_t>(s.components) * nodes->size());
    for (int c = 0; c < s.components; ++c)
        for (int node : *nodes) out.push_back(s.dof(node, c));
    return out;
}

inline SpMat select(const SpMat& a, const std::vector<int>& rows, const std::vector<int>& cols) {
    std::vector<int> rmap(static_cast<std::size_t>(a.rows()), -1);
    std::vector<int> cmap(static_cast<std::size_t>(a.cols()), -1);
    for (std::size_t k = 0; k < rows.size(); ++k) rmap[static_cast<std::size_t>(rows[k])] = static_cast<int>(k);
    for (std::size_t k = 0; k < cols.size(); ++k) cmap[static_cast<std::size_t>(cols[k])] = static_cast<int>(k);
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(a.nonZeros()));
    for (int j = 0; j < a.outerSize(); ++j) {
        const int cj = cmap[static_cast<std::size_t>(j)];
        if (cj < 0) continue;
        for (SpMat::InnerIterator it(a, j); it; ++it) {
            const int ri = rmap[static_cast<std::size_t>(it.row())];
            if (ri >= 0) trips.emplace_back(ri, cj, it.value());
        }
    }
    SpMat out(static_cast<int>(rows.size()), static_cast<int>(cols.size()));
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

}  // namespace detail

/// Restrict rows/cols of an assembled operator to a DOF subset of its spaces.
inline SparseOperator restrict_op(const SparseOperator& op, Restrict row_r, Restrict col_r) {
    SparseOperator out;
    out.row_space = op.row_space;
    out.col_space = op.col_space;
    out.row_restrict = row_r;
    out.col_restrict = col_r;
    out.mat = detail::select(op.mat, detail::restricted_dofs(*op.row_space, row_r),
                             detail::restricted_dofs(*op.col_space, col_r));
    return out;
}

/// A[i][j] = int grad phi_j . grad phi_i (componentwise for vector spaces).
inline SparseOperator assemble_stiffness(const FeSpace& space, Restrict restrict_to = Restrict::full) {
    const Mesh& mesh = *space.mesh;
    const int n = mesh.n_nodes();
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(9 * mesh.n_triangles() * space.components));
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        const Tri& tri = mesh.triangles[static_cast<std::size_t>(t)];
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                const double v = g.area * g.grad_bary[static_cast<std::size_t>(a)].dot(
                                              g.grad_bary[static_cast<std::size_t>(b)]);
                for (int c = 0; c < space.components; ++c)
                    trips.emplace_back(c * n + tri[static_cast<std::size_t>(a)],
                                       c * n + tri[static_cast<std::size_t>(b)], v);
            }
    }
    SparseOperator op;
    op.row_space = op.col_space = &space;
    op.mat = SpMat(space.n_dofs(), space.n_dofs());
    op.mat.setFromTriplets(trips.begin(), trips.end());
    if (restrict_to == Restrict::interior) return restrict_op(op, Restrict::interior, Restrict::interior);
    if (restrict_to == Restrict::boundary)
        throw std::invalid_argument("assemble_stiffness: boundary restriction not meaningful");
    return op;
}

/// M[i][j] = int phi_j phi_i, exact P1 formula (element block area/12 * [[2,1,1],[1,2,1],[1,1,2]]).
inline SparseOperator assemble_mass(const FeSpace& space, Restrict restrict_to = Restrict::full) {
    const Mesh& mesh = *space.mesh;
    const int n = mesh.n_nodes();
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(9 * mesh.n_triangles() * space.components));
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        const Tri& tri = mesh.triangles[static_cast<std::size_t>(t)];
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                const double v = g.area / 12.0 * (a == b ? 2.0 : 1.0);
                for (int c = 0; c < space.components; ++c)
                    trips.emplace_back(c * n + tri[static_cast<std::size_t>(a)],
                                       c * n + tri[static_cast<std::size_t>(b)], v);
            }
    }
    SparseOperator op;
    op.row_space = op.col_space = &space;
    op.mat = SpMat(space.n_dofs(), space.n_dofs());
    op.mat.setFromTriplets(trips.begin(), trips.end());
    if (restrict_to == Restrict::interior) return restrict_op(op, Restrict::interior, Restrict::interior);
    if (restrict_to == Restrict::boundary)
        throw std::invalid_argument("assemble_mass: boundary restriction not meaningful");
    return op;
}

/// Stiffness + mass on the full space (Neumann type, no rows removed).
inline SparseOperator assemble_helmholtz(const FeSpace& space) {
    SparseOperator op = assemble_stiffness(space, Restrict::full);
    op.mat += assemble_mass(space, Restrict::full).mat;
    return op;
}

/// B[i][j] = int phi_j^p div Phi_i^v, rows over interior velocity DOFs,
/// columns over the full scalar space.
inline SparseOperator assemble_div_coupling(const FeSpace& vspace, const FeSpace& pspace) {
    if (vspace.components != 2 || !pspace.scalar())
        throw std::invalid_argument("assemble_div_coupling: expects (vector, scalar) spaces");
    if (vspace.mesh != pspace.mesh)
        throw std::invalid_argument("assemble_div_coupling: spaces live on different meshes");
    const Mesh& mesh = *vspace.mesh;
    const int ni = vspace.n_interior_nodes();
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(18 * mesh.n_triangles()));
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        const Tri& tri = mesh.triangles[static_cast<std::size_t>(t)];
        for (int a = 0; a < 3; ++a) {
            const int pos = vspace.interior_pos[static_cast<std::size_t>(tri[static_cast<std::size_t>(a)])];
            if (pos < 0) continue;
            for (int b = 0; b < 3; ++b) {
                // div of the (node a, comp c) basis is grad_bary[a][c]; int phi_b = area/3
                const Vec2& ga = g.grad_bary[static_cast<std::size_t>(a)];
                trips.emplace_back(pos, tri[static_cast<std::size_t>(b)], g.area / 3.0 * ga.x);
                trips.emplace_back(ni + pos, tri[static_cast<std::size_t>(b)], g.area / 3.0 * ga.y);
            }
        }
    }
    SparseOperator op;
    op.row_space = &vspace;
    op.col_space = &pspace;
    op.row_restrict = Restrict::interior;
    op.mat = SpMat(vspace.n_interior_dofs(), pspace.n_dofs());
    op.mat.setFromTriplets(trips.begin(), trips.end());
    return op;
}

/// C[i][j] = int Phi_j^v . grad lambda_i, scalar test rows restricted per
/// `restrict_rows` (interior -> C_h, boundary -> C_{h,0}), full vector cols.
inline SparseOperator assemble_grad_coupling(const FeSpace& vspace, const FeSpace& test_space,
                                             Restrict restrict_rows) {
    if (vspace.components != 2 || !test_space.scalar())
        throw std::invalid_argument("assemble_grad_coupling: expects (vector, scalar) spaces");
    if (vspace.mesh != test_space.mesh)
        throw std::invalid_argument("assemble_grad_coupling: spaces live on different meshes");
    const Mesh& mesh = *vspace.mesh;
    const int n = mesh.n_nodes();

    auto row_of = [&](int node) -> int {
        switch (restrict_rows) {
            case Restrict::full: return node;
            case Restrict::interior: return test_space.interior_pos[static_cast<std::size_t>(node)];
            case Restrict::boundary: return test_space.boundary_pos[static_cast<std::size_t>(node)];
        }
        return -1;
    };
    int n_rows = 0;
    switch (restrict_rows) {
        case Restrict::full: n_rows = n; break;
        case Restrict::interior: n_rows = test_space.n_interior_nodes(); break;
        case Restrict::boundary: n_rows = test_space.n_boundary_nodes(); break;
    }

    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(18 * mesh.n_triangles()));
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        const Tri& tri = mesh.triangles[static_cast<std::size_t>(t)];
        for (int a = 0; a < 3; ++a) {
            const int row = row_of(tri[static_cast<std::size_t>(a)]);
            if (row < 0) continue;
            const Vec2& ga = g.grad_bary[static_cast<std::size_t>(a)];
            for (int b = 0; b < 3; ++b) {
                trips.emplace_back(row, tri[static_cast<std::size_t>(b)], g.area / 3.0 * ga.x);
                trips.emplace_back(row, n + tri[static_cast<std::size_t>(b)], g.area / 3.0 * ga.y);
            }
        }
    }
    SparseOperator op;
    op.row_space = &test_space;
    op.col_space = &vspace;
    op.row_restrict = restrict_rows;
    op.mat = SpMat(n_rows, vspace.n_dofs());
    op.mat.setFromTriplets(trips.begin(), trips.end());
    return op;
}

/// Load vector <f, phi_i> over the full DOF set, edge-midpoint rule.
inline Vector assemble_load(const FeSpace& space, const ScalarFn& f) {
    if (!space.scalar()) throw std::invalid_argument("assemble_load: scalar density on vector space");
    const Mesh& mesh = *space.mesh;
    Vector load = Vector::Zero(space.n_dofs());
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        const Tri& tri = mesh.triangles[static_cast<std::size_t>(t)];
        for (const QuadPoint& qp : quadrature_midpoint()) {
            const double fv = f(barycentric_point(mesh, t, qp.bary)) * qp.weight * g.area;
            for (int a = 0; a < 3; ++a)
                load[tri[static_cast<std::size_t>(a)]] += fv * qp.bary[static_cast<std::size_t>(a)];
        }
    }
    return load;
}

inline Vector assemble_load(const FeSpace& space, const VectorFn& f) {
    if (space.components != 2)
        throw std::invalid_argument("assemble_load: vector density needs a 2-component space");
    const Mesh& mesh = *space.mesh;
    const int n = mesh.n_nodes();
    Vector load = Vector::Zero(space.n_dofs());
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        const Tri& tri = mesh.triangles[static_cast<std::size_t>(t)];
        for (const QuadPoint& qp : quadrature_midpoint()) {
            const Vec2 fv = f(barycentric_point(mesh, t, qp.bary)) * (qp.weight * g.area);
            for (int a = 0; a < 3; ++a) {
                load[tri[static_cast<std::size_t>(a)]] += fv.x * qp.bary[static_cast<std::size_t>(a)];
                load[n + tri[static_cast<std::size_t>(a)]] += fv.y * qp.bary[static_cast<std::size_t>(a)];
            }
        }
    }
    return load;
}

/// Entries of `full` at the restricted DOF positions, in restricted order.
inline Vector restrict_vector(const FeSpace& space, const Vector& full, Restrict r) {
    const std::vector<int> idx = detail::restricted_dofs(space, r);
    Vector out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Eigen::Index>(k)] = full[idx[k]];
    return out;
}

/// Scatter a restricted vector back into a zero-padded full vector.
inline Vector prolong_vector(const FeSpace& space, const Vector& restricted, Restrict r) {
    const std::vector<int> idx = detail::restricted_dofs(space, r);
    if (restricted.size() != static_cast<Eigen::Index>(idx.size()))
        throw std::invalid_argument("prolong_vector: size mismatch");
    Vector out = Vector::Zero(space.n_dofs());
    for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = restricted[static_cast<Eigen::Index>(k)];
    return out;
}

/// Text dump: "rows cols nnz" header then one "i j v" triple per line.
inline void write_matrix(const SpMat& a, std::ostream& os) {
    os.precision(17);
    os << a.rows() << " " << a.cols() << " " << a.nonZeros() << "\n";
    for (int j = 0; j < a.outerSize(); ++j)
        for (SpMat::InnerIterator it(a, j); it; ++it)
            os << it.row() << " " << it.col() << " " << it.value() << "\n";
}

inline void write_matrix(const SpMat& a, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_matrix: cannot open " + path);
    write_matrix(a, os);
}

}  // namespace stokesext
