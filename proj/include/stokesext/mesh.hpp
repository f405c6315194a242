#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace stokesext {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::sqrt(x * x + y * y); }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

using Tri = std::array<int, 3>;

/// Conforming triangulation of a 2D polygon. Immutable after construction;
/// safe to share read-only across threads.
struct Mesh {
    std::vector<Vec2> nodes;
    std::vector<Tri> triangles;        // node indices, counterclockwise
    std::vector<int> boundary_nodes;   // sorted, unique
    double h = 0.0;                    // longest edge length

    // >0 for meshes produced by build_structured_mesh; enables O(1) point location
    int structured_n = 0;

    int n_nodes() const { return static_cast<int>(nodes.size()); }
    int n_triangles() const { return static_cast<int>(triangles.size()); }

    bool is_boundary_node(int i) const {
        return boundary_flags_.empty() ? false : boundary_flags_[static_cast<std::size_t>(i)];
    }

    void finalize() {
        boundary_flags_.assign(nodes.size(), false);
        for (int b : boundary_nodes) boundary_flags_[static_cast<std::size_t>(b)] = true;
    }

  private:
    std::vector<bool> boundary_flags_;
};

/// Area and constant P1 basis gradients of one triangle.
struct ElementGeometry {
    double area = 0.0;
    std::array<Vec2, 3> grad_bary{};
};

inline ElementGeometry element_geometry(const Mesh& mesh, int t) {
    if (t < 0 || t >= mesh.n_triangles())
        throw std::out_of_range("element_geometry: triangle index " + std::to_string(t) +
                                " out of range");
    const Tri& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const Vec2& a = mesh.nodes[static_cast<std::size_t>(tri[0])];
    const Vec2& b = mesh.nodes[static_cast<std::size_t>(tri[1])];
    const Vec2& c = mesh.nodes[static_cast<std::size_t>(tri[2])];

    const double det = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    if (det <= 0.0)
        throw std::runtime_error("element_geometry: non-positive signed area in triangle " +
                                 std::to_string(t));
    ElementGeometry g;
    g.area = 0.5 * det;
    // grad of the barycentric function at vertex i is the rotated opposite edge / (2A)
    g.grad_bary[0] = Vec2{(b.y - c.y) / det, (c.x - b.x) / det};
    g.grad_bary[1] = Vec2{(c.y - a.y) / det, (a.x - c.x) / det};
    g.grad_bary[2] = Vec2{(a.y - b.y) / det, (b.x - a.x) / det};
    return g;
}

/// Structured triangulation of the unit square: (n+1)x(n+1) node grid, each
/// cell split along the lower-left/upper-right diagonal. h = sqrt(2)/n.
inline Mesh build_structured_mesh(int n) {
    if (n < 1) throw std::invalid_argument("build_structured_mesh: resolution n must be >= 1");

    Mesh mesh;
    const int m = n + 1;
    mesh.nodes.reserve(static_cast<std::size_t>(m * m));
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i)
            mesh.nodes.emplace_back(static_cast<double>(i) / n, static_cast<double>(j) / n);

    auto id = [m](int i, int j) { return i + m * j; };

    mesh.triangles.reserve(static_cast<std::size_t>(2 * n * n));
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
            mesh.triangles.push_back({a, b, c});
            mesh.triangles.push_back({a, c, d});
        }
    }

    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i)
            if (i == 0 || i == n || j == 0 || j == n) mesh.boundary_nodes.push_back(id(i, j));

    mesh.h = std::sqrt(2.0) / n;
    mesh.structured_n = n;
    mesh.finalize();
    return mesh;
}

/// Boundary nodes found topologically: endpoints of edges incident to exactly
/// one triangle. Used as a cross-check against the geometric marking.
inline std::vector<int> boundary_nodes_topological(const Mesh& mesh) {
    std::set<std::pair<int, int>> once, twice;
    for (const Tri& t : mesh.triangles) {
        for (int e = 0; e < 3; ++e) {
            int u = t[static_cast<std::size_t>(e)], v = t[static_cast<std::size_t>((e + 1) % 3)];
            if (u > v) std::swap(u, v);
            auto key = std::make_pair(u, v);
            if (once.count(key)) {
                once.erase(key);
                if (!twice.insert(key).second)
                    throw std::runtime_error("mesh edge shared by more than two triangles");
            } else if (!twice.count(key)) {
                once.insert(key);
            } else {
                throw std::runtime_error("mesh edge shared by more than two triangles");
            }
        }
    }
    std::set<int> nodes;
    for (const auto& [u, v] : once) {
        nodes.insert(u);
        nodes.insert(v);
    }
    return {nodes.begin(), nodes.end()};
}

inline double mesh_total_area(const Mesh& mesh) {
    double area = 0.0;
    for (int t = 0; t < mesh.n_triangles(); ++t) area += element_geometry(mesh, t).area;
    return area;
}

/// Locate the triangle containing point p and return its barycentric
/// coordinates. O(1) on structured meshes, linear scan otherwise.
inline int locate_point(const Mesh& mesh, const Vec2& p, std::array<double, 3>& bary) {
    auto bary_of = [&](int t) {
        const Tri& tri = mesh.triangles[static_cast<std::size_t>(t)];
        const Vec2& a = mesh.nodes[static_cast<std::size_t>(tri[0])];
        const Vec2& b = mesh.nodes[static_cast<std::size_t>(tri[1])];
        const Vec2& c = mesh.nodes[static_cast<std::size_t>(tri[2])];
        const double det = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
        const double l1 = ((p.x - a.x) * (c.y - a.y) - (p.y - a.y) * (c.x - a.x)) / det;
        const double l2 = ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)) / det;
        bary = {1.0 - l1 - l2, l1, l2};
    };

    if (mesh.structured_n > 0) {
        const int n = mesh.structured_n;
        int ci = std::min(std::max(static_cast<int>(p.x * n), 0), n - 1);
        int cj = std::min(std::max(static_cast<int>(p.y * n), 0), n - 1);
        // lower triangle of the cell iff below the diagonal y - yj <= x - xi
        const double lx = p.x * n - ci, ly = p.y * n - cj;
        int t = 2 * (ci + n * cj) + (ly <= lx ? 0 : 1);
        bary_of(t);
        return t;
    }
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        bary_of(t);
        const double eps = 1e-12;
        if (bary[0] >= -eps && bary[1] >= -eps && bary[2] >= -eps) return t;
    }
    throw std::runtime_error("locate_point: point outside mesh");
}

/// Plain-text mesh format:
///   nodes <N> triangles <T>
///   N lines "x y", T lines "i j k" (0-based), then "boundary <count>" + indices.
inline void write_mesh(const Mesh& mesh, std::ostream& os) {
    os.precision(17);
    os << "nodes " << mesh.n_nodes() << " triangles " << mesh.n_triangles() << "\n";
    for (const Vec2& v : mesh.nodes) os << v.x << " " << v.y << "\n";
    for (const Tri& t : mesh.triangles) os << t[0] << " " << t[1] << " " << t[2] << "\n";
    os << "boundary " << mesh.boundary_nodes.size();
    for (int b : mesh.boundary_nodes) os << " " << b;
    os << "\n";
}

inline void write_mesh(const Mesh& mesh, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_mesh: cannot open " + path);
    write_mesh(mesh, os);
}

inline Mesh read_mesh(std::istream& is) {
    Mesh mesh;
    std::string kw;
    int n_nodes = 0, n_tris = 0;
    if (!(is >> kw >> n_nodes) || kw != "nodes")
        throw std::runtime_error("read_mesh: expected 'nodes <N>'");
    if (!(is >> kw >> n_tris) || kw != "triangles")
        throw std::runtime_error("read_mesh: expected 'triangles <T>'");
    mesh.nodes.resize(static_cast<std::size_t>(n_nodes));
    for (auto& v : mesh.nodes)
        if (!(is >> v.x >> v.y)) throw std::runtime_error("read_mesh: bad node line");
    mesh.triangles.resize(static_cast<std::size_t>(n_tris));
    for (auto& t : mesh.triangles)
        if (!(is >> t[0] >> t[1] >> t[2])) throw std::runtime_error("read_mesh: bad triangle line");
    int n_bnd = 0;
    if (!(is >> kw >> n_bnd) || kw != "boundary")
        throw std::runtime_error("read_mesh: expected 'boundary <count>'");
    mesh.boundary_nodes.resize(static_cast<std::size_t>(n_bnd));
    for (int& b : mesh.boundary_nodes)
        if (!(is >> b)) throw std::runtime_error("read_mesh: bad boundary index");

    double hmax = 0.0;
    for (const Tri& t : mesh.triangles) {
        for (int e = 0; e < 3; ++e) {
            const Vec2 d = mesh.nodes[static_cast<std::size_t>(t[static_cast<std::size_t>(e)])] -
                           mesh.nodes[static_cast<std::size_t>(t[static_cast<std::size_t>((e + 1) % 3)])];
            hmax = std::max(hmax, d.norm());
        }
    }
    mesh.h = hmax;
    mesh.finalize();
    return mesh;
}

inline Mesh read_mesh(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("read_mesh: cannot open " + path);
    return read_mesh(is);
}

}  // namespace stokesext
