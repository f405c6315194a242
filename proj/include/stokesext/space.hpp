#pragma once

#include <Eigen/Dense>

#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stokesext/mesh.hpp"
#include "stokesext/quadrature.hpp"

namespace stokesext {

using Vector = Eigen::VectorXd;

/// Continuous P1 nodal space (scalar or vector-valued) with the index
/// structure used throughout: full space X_h = Y_h, interior-trace subspace
/// X_0h/Y_0h, and the boundary complement Xi_h. Vector DOFs are
/// component-blocked: dof(node, c) = c * n_nodes + node.
struct FeSpace {
    const Mesh* mesh = nullptr;
    int components = 1;
    std::vector<int> interior_nodes;   // ascending node ids
    std::vector<int> boundary_nodes;   // ascending node ids
    std::vector<int> interior_pos;     // node -> position in interior_nodes, -1 if boundary
    std::vector<int> boundary_pos;     // node -> position in boundary_nodes, -1 if interior

    int n_nodes() const { return mesh->n_nodes(); }
    int n_dofs() const { return components * mesh->n_nodes(); }
    int n_interior_nodes() const { return static_cast<int>(interior_nodes.size()); }
    int n_interior_dofs() const { return components * n_interior_nodes(); }
    int n_boundary_nodes() const { return static_cast<int>(boundary_nodes.size()); }

    bool scalar() const { return components == 1; }

    int dof(int node, int comp) const { return comp * n_nodes() + node; }

    /// Position of (node, comp) in the interior-restricted numbering, blocked
    /// by component; -1 for boundary nodes.
    int interior_dof(int node, int comp) const {
        const int p = interior_pos[static_cast<std::size_t>(node)];
        return p < 0 ? -1 : comp * n_interior_nodes() + p;
    }
};

inline FeSpace build_p1_space(const Mesh& mesh, int components = 1) {
    if (components < 1) throw std::invalid_argument("build_p1_space: components must be >= 1");
    FeSpace s;
    s.mesh = &mesh;
    s.components = components;
    s.interior_pos.assign(static_cast<std::size_t>(mesh.n_nodes()), -1);
    s.boundary_pos.assign(static_cast<std::size_t>(mesh.n_nodes()), -1);
    for (int i = 0; i < mesh.n_nodes(); ++i) {
        if (mesh.is_boundary_node(i)) {
            s.boundary_pos[static_cast<std::size_t>(i)] = static_cast<int>(s.boundary_nodes.size());
            s.boundary_nodes.push_back(i);
        } else {
            s.interior_pos[static_cast<std::size_t>(i)] = static_cast<int>(s.interior_nodes.size());
            s.interior_nodes.push_back(i);
        }
    }
    return s;
}

/// Nodal coefficient vector over a space.
struct Field {
    const FeSpace* space = nullptr;
    Vector coeffs;

    Field() = default;
    explicit Field(const FeSpace& s) : space(&s), coeffs(Vector::Zero(s.n_dofs())) {}
    Field(const FeSpace& s, Vector c) : space(&s), coeffs(std::move(c)) {
        if (coeffs.size() != s.n_dofs())
            throw std::invalid_argument("Field: coefficient length does not match space layout");
    }

    double operator()(int node, int comp = 0) const { return coeffs[space->dof(node, comp)]; }

    /// Pointwise evaluation of component comp at an arbitrary point.
    double eval(const Vec2& p, int comp = 0) const {
        std::array<double, 3> b{};
        const int t = locate_point(*space->mesh, p, b);
        const Tri& tri = space->mesh->triangles[static_cast<std::size_t>(t)];
        double v = 0.0;
        for (int k = 0; k < 3; ++k)
            v += b[static_cast<std::size_t>(k)] * coeffs[space->dof(tri[static_cast<std::size_t>(k)], comp)];
        return v;
    }
};

/// Weights w with w . coeffs = integral of the P1 function; w_i = int phi_i.
struct ZeroMeanConstraint {
    Vector weights;
    double domain_measure = 0.0;

    double mean_defect(const Vector& coeffs) const { return weights.dot(coeffs); }

    /// Remove the weighted mean: result has w-mean zero.
    Vector project(const Vector& coeffs) const {
        return coeffs.array() - weights.dot(coeffs) / domain_measure;
    }
};

inline ZeroMeanConstraint zero_mean_constraint(const FeSpace& space) {
    if (!space.scalar())
        throw std::invalid_argument("zero_mean_constraint: requires a scalar space");
    ZeroMeanConstraint z;
    z.weights = Vector::Zero(space.n_dofs());
    const Mesh& mesh = *space.mesh;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        for (int k = 0; k < 3; ++k)
            z.weights[mesh.triangles[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)]] +=
                g.area / 3.0;
    }
    z.domain_measure = z.weights.sum();
    return z;
}

using ScalarFn = std::function<double(const Vec2&)>;
using VectorFn = std::function<Vec2(const Vec2&)>;

inline Field interpolate(const FeSpace& space, const ScalarFn& f) {
    if (!space.scalar()) throw std::invalid_argument("interpolate: scalar function on vector space");
    Field out(space);
    for (int i = 0; i < space.n_nodes(); ++i)
        out.coeffs[i] = f(space.mesh->nodes[static_cast<std::size_t>(i)]);
    return out;
}

inline Field interpolate(const FeSpace& space, const VectorFn& f) {
    if (space.components != 2)
        throw std::invalid_argument("interpolate: vector function needs a 2-component space");
    Field out(space);
    for (int i = 0; i < space.n_nodes(); ++i) {
        const Vec2 v = f(space.mesh->nodes[static_cast<std::size_t>(i)]);
        out.coeffs[space.dof(i, 0)] = v.x;
        out.coeffs[space.dof(i, 1)] = v.y;
    }
    return out;
}

/// CSV dump: node,x,y,value[,value2]
inline void write_field_csv(const Field& f, std::ostream& os, const std::string& name = "") {
    const FeSpace& s = *f.space;
    os.precision(17);
    if (!name.empty()) os << "field,";
    os << "node,x,y,value";
    if (s.components == 2) os << ",value2";
    os << "\n";
    for (int i = 0; i < s.n_nodes(); ++i) {
        const Vec2& p = s.mesh->nodes[static_cast<std::size_t>(i)];
        if (!name.empty()) os << name << ",";
        os << i << "," << p.x << "," << p.y << "," << f.coeffs[s.dof(i, 0)];
        if (s.components == 2) os << "," << f.coeffs[s.dof(i, 1)];
        os << "\n";
    }
}

inline void write_field_csv(const Field& f, const std::string& path, const std::string& name = "") {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_field_csv: cannot open " + path);
    write_field_csv(f, os, name);
}

}  // namespace stokesext
