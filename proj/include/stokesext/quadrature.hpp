#pragma once

#include <array>
#include <cmath>

#include "stokesext/mesh.hpp"

namespace stokesext {

struct QuadPoint {
    std::array<double, 3> bary;
    double weight;  // fraction of the element area
};

/// Edge-midpoint rule, exact for polynomials of degree 2. Used for all data
/// (load vector) integrals so quadrature never perturbs the P1 structure.
inline const std::array<QuadPoint, 3>& quadrature_midpoint() {
    static const std::array<QuadPoint, 3> rule = {{
        {{0.5, 0.5, 0.0}, 1.0 / 3.0},
        {{0.0, 0.5, 0.5}, 1.0 / 3.0},
        {{0.5, 0.0, 0.5}, 1.0 / 3.0},
    }};
    return rule;
}

/// Seven-point Radon rule, exact for degree 5. Used for error integrals only,
/// keeping quadrature error far below discretization error.
inline const std::array<QuadPoint, 7>& quadrature_degree5() {
    static const std::array<QuadPoint, 7> rule = [] {
        const double s = std::sqrt(15.0);
        const double g1 = (6.0 - s) / 21.0, w1 = (155.0 - s) / 1200.0;
        const double g2 = (6.0 + s) / 21.0, w2 = (155.0 + s) / 1200.0;
        return std::array<QuadPoint, 7>{{
            {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, 9.0 / 40.0},
            {{1.0 - 2.0 * g1, g1, g1}, w1},
            {{g1, 1.0 - 2.0 * g1, g1}, w1},
            {{g1, g1, 1.0 - 2.0 * g1}, w1},
            {{1.0 - 2.0 * g2, g2, g2}, w2},
            {{g2, 1.0 - 2.0 * g2, g2}, w2},
            {{g2, g2, 1.0 - 2.0 * g2}, w2},
        }};
    }();
    return rule;
}

inline Vec2 barycentric_point(const Mesh& mesh, int t, const std::array<double, 3>& b) {
    const Tri& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const Vec2& a0 = mesh.nodes[static_cast<std::size_t>(tri[0])];
    const Vec2& a1 = mesh.nodes[static_cast<std::size_t>(tri[1])];
    const Vec2& a2 = mesh.nodes[static_cast<std::size_t>(tri[2])];
    return {b[0] * a0.x + b[1] * a1.x + b[2] * a2.x, b[0] * a0.y + b[1] * a1.y + b[2] * a2.y};
}

}  // namespace stokesext
