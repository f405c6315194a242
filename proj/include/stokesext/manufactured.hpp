#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "stokesext/space.hpp"

namespace stokesext {

/// Divergence-free exact solution with homogeneous velocity trace and
/// zero-mean pressure; forcing f = -nu*Lap(u) + grad p evaluated analytically
/// (nu = 1).
struct ManufacturedCase {
    std::string name;
    VectorFn velocity;
    // rows of the Jacobian: grad u1, grad u2
    std::function<std::array<Vec2, 2>(const Vec2&)> velocity_grad;
    ScalarFn pressure;
    VectorFn pressure_grad;
    VectorFn forcing;
};

namespace detail {

// a(s) = s^2 (1-s)^2 and derivatives
inline double bump(double s) { return s * s * (1.0 - s) * (1.0 - s); }
inline double bump1(double s) { return 2.0 * s * (1.0 - s) * (1.0 - 2.0 * s); }
inline double bump2(double s) { return 2.0 * (1.0 - 6.0 * s + 6.0 * s * s); }
inline double bump3(double s) { return 12.0 * (2.0 * s - 1.0); }

}  // namespace detail

inline ManufacturedCase manufactured_stokes(const std::string& name) {
    using std::cos;
    using std::sin;
    constexpr double pi = std::numbers::pi;

    if (name == "stream4") {
        // u = curl(psi), psi = x^2(1-x)^2 y^2(1-y)^2 ; p = x^3 + y^3 - 1/2
        ManufacturedCase c;
        c.name = name;
        c.velocity = [](const Vec2& p) {
            using namespace detail;
            return Vec2{bump(p.x) * bump1(p.y), -bump1(p.x) * bump(p.y)};
        };
        c.velocity_grad = [](const Vec2& p) {
            using namespace detail;
            return std::array<Vec2, 2>{
                Vec2{bump1(p.x) * bump1(p.y), bump(p.x) * bump2(p.y)},
                Vec2{-bump2(p.x) * bump(p.y), -bump1(p.x) * bump1(p.y)},
            };
        };
        c.pressure = [](const Vec2& p) { return p.x * p.x * p.x + p.y * p.y * p.y - 0.5; };
        c.pressure_grad = [](const Vec2& p) { return Vec2{3.0 * p.x * p.x, 3.0 * p.y * p.y}; };
        c.forcing = [](const Vec2& p) {
            using namespace detail;
            const double lap_u1 = bump2(p.x) * bump1(p.y) + bump(p.x) * bump3(p.y);
            const double lap_u2 = -bump3(p.x) * bump(p.y) - bump1(p.x) * bump2(p.y);
            return Vec2{-lap_u1 + 3.0 * p.x * p.x, -lap_u2 + 3.0 * p.y * p.y};
        };
        return c;
    }

    if (name == "trig") {
        // stream function sin^2(pi x) sin^2(pi y) / pi ; p = cos(pi x) cos(pi y)
        ManufacturedCase c;
        c.name = name;
        c.velocity = [=](const Vec2& p) {
            const double sx = sin(pi * p.x), sy2 = sin(2.0 * pi * p.y);
            const double sy = sin(pi * p.y), sx2 = sin(2.0 * pi * p.x);
            return Vec2{sx * sx * sy2, -sx2 * sy * sy};
        };
        c.velocity_grad = [=](const Vec2& p) {
            const double sx = sin(pi * p.x), sy = sin(pi * p.y);
            const double sx2 = sin(2.0 * pi * p.x), sy2 = sin(2.0 * pi * p.y);
            const double cx2 = cos(2.0 * pi * p.x), cy2 = cos(2.0 * pi * p.y);
            return std::array<Vec2, 2>{
                Vec2{pi * sx2 * sy2, 2.0 * pi * sx * sx * cy2},
                Vec2{-2.0 * pi * cx2 * sy * sy, -pi * sx2 * sy2},
            };
        };
        c.pressure = [=](const Vec2& p) { return cos(pi * p.x) * cos(pi * p.y); };
        c.pressure_grad = [=](const Vec2& p) {
            return Vec2{-pi * sin(pi * p.x) * cos(pi * p.y), -pi * cos(pi * p.x) * sin(pi * p.y)};
        };
        c.forcing = [=](const Vec2& p) {
            const double sx = sin(pi * p.x), sy = sin(pi * p.y);
            const double sx2 = sin(2.0 * pi * p.x), sy2 = sin(2.0 * pi * p.y);
            const double cx2 = cos(2.0 * pi * p.x), cy2 = cos(2.0 * pi * p.y);
            const double lap_u1 = 2.0 * pi * pi * (cx2 - 2.0 * sx * sx) * sy2;
            const double lap_u2 = 2.0 * pi * pi * sx2 * (2.0 * sy * sy - cy2);
            const Vec2 gp{-pi * sx * cos(pi * p.y), -pi * cos(pi * p.x) * sy};
            return Vec2{-lap_u1 + gp.x, -lap_u2 + gp.y};
        };
        return c;
    }

    throw std::invalid_argument("manufactured_stokes: unknown case '" + name + "'");
}

inline std::vector<std::string> manufactured_catalog() { return {"stream4", "trig"}; }

}  // namespace stokesext
