#pragma once

#include <cmath>
#include <optional>

#include "stokesext/manufactured.hpp"
#include "stokesext/space.hpp"

namespace stokesext {

struct ErrorNorms {
    double l2 = 0.0;
    double h1semi = 0.0;
    double linf_nodal = 0.0;
};

namespace detail {

template <typename ValueAt, typename GradAt, typename NodalErr>
ErrorNorms integrate_error(const Mesh& mesh, int n_nodes, ValueAt value_err, GradAt grad_err,
                           NodalErr nodal_err) {
    ErrorNorms e;
    double l2sq = 0.0, h1sq = 0.0;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        for (const QuadPoint& qp : quadrature_degree5()) {
            const Vec2 x = barycentric_point(mesh, t, qp.bary);
            l2sq += qp.weight * g.area * value_err(t, qp, x);
            h1sq += qp.weight * g.area * grad_err(t, qp, x);
        }
    }
    e.l2 = std::sqrt(l2sq);
    e.h1semi = std::sqrt(h1sq);
    for (int i = 0; i < n_nodes; ++i) e.linf_nodal = std::max(e.linf_nodal, nodal_err(i));
    return e;
}

}  // namespace detail

/// Quadrature-evaluated ||f_h - exact|| in L2, H1 seminorm, and nodal max.
/// Degree-5 rule keeps quadrature error far below discretization error.
inline ErrorNorms error_norms(const Field& fh, const ScalarFn& exact,
                              const std::optional<VectorFn>& exact_grad = std::nullopt) {
    const FeSpace& s = *fh.space;
    if (!s.scalar()) throw std::invalid_argument("error_norms: scalar exact vs vector field");
    const Mesh& mesh = *s.mesh;

    auto value_err = [&](int t, const QuadPoint& qp, const Vec2& x) {
        const Tri& tri = mesh.triangles[static_cast<std::size_t>(t)];
        double v = 0.0;
        for (int k = 0; k < 3; ++k)
            v += qp.bary[static_cast<std::size_t>(k)] * fh.coeffs[tri[static_cast<std::size_t>(k)]];
        const double d = v - exact(x);
        return d * d;
    };
    auto grad_err = [&](int t, const QuadPoint&, const Vec2& x) {
        if (!exact_grad) return 0.0;
        const Tri& tri = mesh.triangles[static_cast<std::size_t>(t)];
        const ElementGeometry g = element_geometry(mesh, t);
        Vec2 gh{0.0, 0.0};
        for (int k = 0; k < 3; ++k)
            gh = gh + fh.coeffs[tri[static_cast<std::size_t>(k)]] * g.grad_bary[static_cast<std::size_t>(k)];
        const Vec2 d = gh - (*exact_grad)(x);
        return d.dot(d);
    };
    auto nodal = [&](int i) {
        return std::abs(fh.coeffs[i] - exact(mesh.nodes[static_cast<std::size_t>(i)]));
    };
    return detail::integrate_error(mesh, s.n_nodes(), value_err, grad_err, nodal);
}

inline ErrorNorms error_norms(const Field& fh, const VectorFn& exact,
                              const std::function<std::array<Vec2, 2>(const Vec2&)>& exact_grad = {}) {
    const FeSpace& s = *fh.space;
    if (s.components != 2) throw std::invalid_argument("error_norms: vector exact vs scalar field");
    const Mesh& mesh = *s.mesh;
    const int n = s.n_nodes();

    auto value_err = [&](int t, const QuadPoint& qp, const Vec2& x) {
        const Tri& tri = mesh.triangles[static_cast<std::size_t>(t)];
        Vec2 v{0.0, 0.0};
        for (int k = 0; k < 3; ++k) {
            const int node = tri[static_cast<std::size_t>(k)];
            v.x += qp.bary[static_cast<std::size_t>(k)] * fh.coeffs[node];
            v.y += qp.bary[static_cast<std::size_t>(k)] * fh.coeffs[n + node];
        }
        const Vec2 d = v - exact(x);
        return d.dot(d);
    };
    auto grad_err = [&](int t, const QuadPoint&, const Vec2& x) {
        if (!exact_grad) return 0.0;
        const Tri& tri = mesh.triangles[static_cast<std::size_t>(t)];
        const ElementGeometry g = element_geometry(mesh, t);
        Vec2 g1{0.0, 0.0}, g2{0.0, 0.0};
        for (int k = 0; k < 3; ++k) {
            const int node = tri[static_cast<std::size_t>(k)];
            g1 = g1 + fh.coeffs[node] * g.grad_bary[static_cast<std::size_t>(k)];
            g2 = g2 + fh.coeffs[n + node] * g.grad_bary[static_cast<std::size_t>(k)];
        }
        const std::array<Vec2, 2> ge = exact_grad(x);
        const Vec2 d1 = g1 - ge[0], d2 = g2 - ge[1];
        return d1.dot(d1) + d2.dot(d2);
    };
    auto nodal = [&](int i) {
        const Vec2 v{fh.coeffs[i], fh.coeffs[n + i]};
        const Vec2 d = v - exact(mesh.nodes[static_cast<std::size_t>(i)]);
        return std::max(std::abs(d.x), std::abs(d.y));
    };
    return detail::integrate_error(mesh, n, value_err, grad_err, nodal);
}

/// || div u_h ||_0. The divergence of a P1 vector field is elementwise
/// constant, so this is exact.
inline double divergence_l2(const Field& u) {
    const FeSpace& s = *u.space;
    if (s.components != 2) throw std::invalid_argument("divergence_l2: expects a vector field");
    const Mesh& mesh = *s.mesh;
    const int n = s.n_nodes();
    double acc = 0.0;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        const Tri& tri = mesh.triangles[static_cast<std::size_t>(t)];
        double div = 0.0;
        for (int k = 0; k < 3; ++k) {
            const int node = tri[static_cast<std::size_t>(k)];
            div += u.coeffs[node] * g.grad_bary[static_cast<std::size_t>(k)].x +
                   u.coeffs[n + node] * g.grad_bary[static_cast<std::size_t>(k)].y;
        }
        acc += g.area * div * div;
    }
    return std::sqrt(acc);
}

inline double l2_norm_function(const Mesh& mesh, const ScalarFn& f) {
    double acc = 0.0;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        for (const QuadPoint& qp : quadrature_degree5()) {
            const double v = f(barycentric_point(mesh, t, qp.bary));
            acc += qp.weight * g.area * v * v;
        }
    }
    return std::sqrt(acc);
}

inline double l2_norm_function(const Mesh& mesh, const VectorFn& f) {
    double acc = 0.0;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        for (const QuadPoint& qp : quadrature_degree5()) {
            const Vec2 v = f(barycentric_point(mesh, t, qp.bary));
            acc += qp.weight * g.area * v.dot(v);
        }
    }
    return std::sqrt(acc);
}

}  // namespace stokesext
