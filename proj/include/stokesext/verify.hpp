#pragma once

#include <Eigen/SVD>

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stokesext/extended_system.hpp"
#include "stokesext/manufactured.hpp"
#include "stokesext/norms.hpp"

namespace stokesext {

struct RateRow {
    int n = 0;
    double h = 0.0;
    std::map<std::string, double> errors;
};

/// Per-resolution errors plus fitted orders. The global order is the
/// least-squares slope in log-log; the last-interval order is the slope of
/// the final refinement step (the asymptotic-regime figure acceptance uses).
/// Non-monotone error sequences are flagged and get NaN orders instead of a
/// fitted slope.
struct RateTable {
    std::vector<RateRow> rows;
    std::map<std::string, double> global_order;
    std::map<std::string, double> last_order;
    std::map<std::string, bool> monotone;

    void fit() {
        global_order.clear();
        last_order.clear();
        monotone.clear();
        if (rows.size() < 2) return;
        for (const auto& [key, unused] : rows.front().errors) {
            bool mono = true;
            std::vector<double> lh, le;
            for (const RateRow& r : rows) {
                const double e = r.errors.at(key);
                if (!(e > 0.0)) mono = false;
                lh.push_back(std::log(r.h));
                le.push_back(std::log(std::max(e, 1e-300)));
            }
            for (std::size_t i = 1; i < rows.size(); ++i)
                if (rows[i].errors.at(key) >= rows[i - 1].errors.at(key)) mono = false;
            monotone[key] = mono;
            if (!mono) {
                global_order[key] = std::numeric_limits<double>::quiet_NaN();
                last_order[key] = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            double sh = 0, se = 0, shh = 0, she = 0;
            const double m = static_cast<double>(lh.size());
            for (std::size_t i = 0; i < lh.size(); ++i) {
                sh += lh[i];
                se += le[i];
                shh += lh[i] * lh[i];
                she += lh[i] * le[i];
            }
            global_order[key] = (m * she - sh * se) / (m * shh - sh * sh);
            const std::size_t k = rows.size() - 1;
            last_order[key] = (le[k] - le[k - 1]) / (lh[k] - lh[k - 1]);
        }
    }
};

inline void write_rate_csv(const RateTable& t, std::ostream& os,
                           const std::vector<std::string>& columns) {
    os.precision(17);
    os << "n,h";
    for (const auto& c : columns) os << "," << c;
    os << "\n";
    for (const RateRow& r : t.rows) {
        os << r.n << "," << r.h;
        for (const auto& c : columns) os << "," << r.errors.at(c);
        os << "\n";
    }
}

/// H1 and L2 norms of a coefficient field (exact quadrature for P1).
inline double field_l2(const Field& f) {
    if (f.space->scalar())
        return error_norms(f, ScalarFn([](const Vec2&) { return 0.0; })).l2;
    return error_norms(f, VectorFn([](const Vec2&) { return Vec2{0.0, 0.0}; })).l2;
}

inline double field_h1(const Field& f) {
    if (f.space->scalar()) {
        const ErrorNorms e = error_norms(f, ScalarFn([](const Vec2&) { return 0.0; }),
                                         VectorFn([](const Vec2&) { return Vec2{0.0, 0.0}; }));
        return std::sqrt(e.l2 * e.l2 + e.h1semi * e.h1semi);
    }
    const ErrorNorms e = error_norms(
        f, VectorFn([](const Vec2&) { return Vec2{0.0, 0.0}; }),
        [](const Vec2&) { return std::array<Vec2, 2>{Vec2{0.0, 0.0}, Vec2{0.0, 0.0}}; });
    return std::sqrt(e.l2 * e.l2 + e.h1semi * e.h1semi);
}

/// Solve one manufactured case at one resolution; returns (u_h, p_h).
inline std::pair<Field, Field> solve_manufactured(const ManufacturedCase& mc, double alpha,
                                                  const StokesSpaces& spaces, ZMode mode) {
    const StokesData data = StokesData::stokes(alpha, mc.forcing);
    if (mode == ZMode::interior_X0h) {
        const BlockSystem sys = assemble_reduced_3block(data, spaces);
        const ExtendedState st = solve(sys);
        return {st.u, st.p};
    }
    const BlockSystem sys = assemble_monolithic(data, spaces, ZMode::full_Xh);
    const ExtendedState st = solve(sys);
    return {st.u, st.p};
}

/// Errors of the extended-system solve against the manufactured solution:
/// ||u-u_h||_1 seminorm, ||u-u_h||_0, ||p-p_h||_0, ||div u_h||_0.
inline RateTable convergence_study(const ManufacturedCase& mc, double alpha,
                                   const std::vector<int>& n_list,
                                   ZMode mode = ZMode::interior_X0h) {
    if (n_list.size() < 3)
        throw std::invalid_argument("convergence_study: need at least 3 resolutions");
    RateTable table;
    for (int n : n_list) {
        const Mesh mesh = build_structured_mesh(n);
        const StokesSpaces spaces = make_spaces(mesh);
        const auto [uh, ph] = solve_manufactured(mc, alpha, spaces, mode);
        const ErrorNorms ue = error_norms(uh, mc.velocity, mc.velocity_grad);
        const ErrorNorms pe = error_norms(ph, mc.pressure);
        RateRow row;
        row.n = n;
        row.h = mesh.h;
        row.errors["err_u_H1"] = ue.h1semi;
        row.errors["err_u_L2"] = ue.l2;
        row.errors["err_p_L2"] = pe.l2;
        row.errors["div_u_L2"] = divergence_l2(uh);
        table.rows.push_back(std::move(row));
    }
    table.fit();
    return table;
}

/// Independent numerical cross-check: equal-order P1/P1 Stokes with
/// pressure-Laplacian stabilization delta h^2 (grad p, grad mu), delta = 0.05.
/// Shares only mesh and form assembly with the extended solver.
inline std::pair<Field, Field> reference_oracle_solve(const VectorFn& f, const StokesSpaces& spaces,
                                                      double delta = 0.05) {
    const FeSpace& S = spaces.scalar;
    const FeSpace& V = spaces.velocity;
    const int n = S.n_nodes(), ni = S.n_interior_nodes();
    const int nu = 2 * ni, total = nu + n + 1;
    const double h = spaces.mesh->h;

    const SpMat A0 = assemble_stiffness(V, Restrict::interior).mat;
    const SpMat B = assemble_div_coupling(V, S).mat;
    const SpMat D = assemble_stiffness(S).mat;
    const Vector& w = spaces.zmc.weights;

    std::vector<Triplet> T;
    detail::add_block(T, A0, 0, 0);
    detail::add_block(T, B, 0, nu, -1.0);
    detail::add_block(T, SpMat(B.transpose()), nu, 0, -1.0);
    detail::add_block(T, D, nu, nu, -delta * h * h);
    for (int i = 0; i < n; ++i) {
        T.emplace_back(nu + i, nu + n, -w[i]);
        T.emplace_back(nu + n, nu + i, -w[i]);
    }
    SpMat m(total, total);
    m.setFromTriplets(T.begin(), T.end());

    Vector rhs = Vector::Zero(total);
    if (f) rhs.head(nu) = restrict_vector(V, assemble_load(V, f), Restrict::interior);

    const Vector x = detail::sparse_lu_solve(m, rhs, "reference_oracle");
    Field u(V, prolong_vector(V, Vector(x.head(nu)), Restrict::interior));
    Field p(S, Vector(x.segment(nu, n)));
    return {u, p};
}

/// Smallest/largest singular value of the unstabilized equal-order P1/P1
/// saddle matrix (with the same zero-mean border as the oracle). The inf-sup
/// failure shows up as sigma_min / sigma_max at roundoff level.
inline std::pair<double, double> negative_control_svd(const StokesSpaces& spaces) {
    const FeSpace& S = spaces.scalar;
    const FeSpace& V = spaces.velocity;
    const int n = S.n_nodes(), nu = 2 * S.n_interior_nodes();
    const int total = nu + n + 1;

    const SpMat A0 = assemble_stiffness(V, Restrict::interior).mat;
    const SpMat B = assemble_div_coupling(V, S).mat;
    const Vector& w = spaces.zmc.weights;

    std::vector<Triplet> T;
    detail::add_block(T, A0, 0, 0);
    detail::add_block(T, B, 0, nu, -1.0);
    detail::add_block(T, SpMat(B.transpose()), nu, 0, -1.0);
    for (int i = 0; i < n; ++i) {
        T.emplace_back(nu + i, nu + n, -w[i]);
        T.emplace_back(nu + n, nu + i, -w[i]);
    }
    SpMat m(total, total);
    m.setFromTriplets(T.begin(), T.end());

    const Eigen::MatrixXd dense = Eigen::MatrixXd(m);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense);
    const auto& sv = svd.singularValues();
    return {sv[sv.size() - 1], sv[0]};
}

/// Pairwise solution differences across the alpha family at fixed meshes:
/// nonzero at fixed h, and decreasing under refinement because every family
/// member converges to the same exact solution.
struct AlphaSweepReport {
    std::vector<int> n_list;
    std::vector<double> alphas;
    // diff_p[k](i,j) = ||p_h(alpha_i) - p_h(alpha_j)||_0 at n_list[k]
    std::vector<Eigen::MatrixXd> diff_p, diff_u;
};

inline AlphaSweepReport alpha_sweep(const ManufacturedCase& mc, const std::vector<int>& n_list,
                                    const std::vector<double>& alphas) {
    for (double a : alphas)
        if (a == 1.0) throw std::invalid_argument("alpha_sweep: alpha = 1 rejected");
    AlphaSweepReport rep;
    rep.n_list = n_list;
    rep.alphas = alphas;
    for (int n : n_list) {
        const Mesh mesh = build_structured_mesh(n);
        const StokesSpaces spaces = make_spaces(mesh);
        std::vector<Field> us, ps;
        for (double a : alphas) {
            auto [u, p] = solve_manufactured(mc, a, spaces, ZMode::interior_X0h);
            us.push_back(std::move(u));
            ps.push_back(std::move(p));
        }
        const std::size_t m = alphas.size();
        Eigen::MatrixXd dp = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m),
                                                   static_cast<Eigen::Index>(m));
        Eigen::MatrixXd du = dp;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                Field pd = ps[i];
                pd.coeffs -= ps[j].coeffs;
                Field ud = us[i];
                ud.coeffs -= us[j].coeffs;
                dp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = field_l2(pd);
                du(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = field_h1(ud);
            }
        rep.diff_p.push_back(std::move(dp));
        rep.diff_u.push_back(std::move(du));
    }
    return rep;
}

/// Rates of the discrete operator catalog on manufactured elliptic problems:
/// T_PD,h and T_VPD,h in the H1 seminorm, B_1,h in H1, pi_h in L2.
inline RateTable operator_rate_study(const std::vector<int>& n_list) {
    constexpr double pi = std::numbers::pi;
    const ScalarFn q_exact = [=](const Vec2& p) { return std::sin(pi * p.x) * std::sin(pi * p.y); };
    const VectorFn q_grad = [=](const Vec2& p) {
        return Vec2{pi * std::cos(pi * p.x) * std::sin(pi * p.y),
                    pi * std::sin(pi * p.x) * std::cos(pi * p.y)};
    };
    const ScalarFn q_rhs = [=](const Vec2& p) {
        return 2.0 * pi * pi * std::sin(pi * p.x) * std::sin(pi * p.y);
    };
    const ScalarFn b_exact = [=](const Vec2& p) { return std::cos(pi * p.x) * std::cos(pi * p.y); };
    const VectorFn b_grad = [=](const Vec2& p) {
        return Vec2{-pi * std::sin(pi * p.x) * std::cos(pi * p.y),
                    -pi * std::cos(pi * p.x) * std::sin(pi * p.y)};
    };
    const ScalarFn b_rhs = [=](const Vec2& p) {
        return (1.0 + 2.0 * pi * pi) * std::cos(pi * p.x) * std::cos(pi * p.y);
    };
    const VectorFn pi_target = [=](const Vec2& p) {
        return Vec2{std::sin(pi * p.x) * std::sin(pi * p.y),
                    std::cos(pi * p.x) * std::cos(pi * p.y)};
    };

    RateTable table;
    for (int n : n_list) {
        const Mesh mesh = build_structured_mesh(n);
        const FeSpace sca = build_p1_space(mesh, 1);
        const FeSpace vel = build_p1_space(mesh, 2);

        const Field q_h = solve_poisson_dirichlet(RhsFunctional::from_density(sca, q_rhs), sca);
        const VectorFn v_rhs = [&](const Vec2& p) { return Vec2{q_rhs(p), q_rhs(p)}; };
        const Field v_h = solve_poisson_dirichlet(RhsFunctional::from_density(vel, v_rhs), vel);
        const Field b_h = solve_helmholtz(RhsFunctional::from_density(sca, b_rhs), sca);
        const Field pi_h = l2_project(RhsFunctional::from_density(vel, pi_target), vel);

        const VectorFn v_exact = [&](const Vec2& p) { return Vec2{q_exact(p), q_exact(p)}; };
        const auto v_exact_grad = [&](const Vec2& p) {
            return std::array<Vec2, 2>{q_grad(p), q_grad(p)};
        };

        RateRow row;
        row.n = n;
        row.h = mesh.h;
        row.errors["TPD_H1"] = error_norms(q_h, q_exact, q_grad).h1semi;
        row.errors["TPD_L2"] = error_norms(q_h, q_exact).l2;
        row.errors["TVPD_H1"] = error_norms(v_h, v_exact, v_exact_grad).h1semi;
        row.errors["B1_H1"] = [&] {
            const ErrorNorms e = error_norms(b_h, b_exact, b_grad);
            return std::sqrt(e.l2 * e.l2 + e.h1semi * e.h1semi);
        }();
        row.errors["pi_L2"] = error_norms(pi_h, pi_target).l2;
        table.rows.push_back(std::move(row));
    }
    table.fit();
    return table;
}

/// ||(I - pi_0h) f||_{-1} / ||f||_0 measured through the dual-norm surrogate
/// on a fixed nested reference space (the same-space pairing is identically
/// zero by Galerkin orthogonality).
inline RateTable projection_defect_study(const std::vector<int>& n_list,
                                         const std::vector<VectorFn>& fields, int n_ref = 128) {
    for (int n : n_list)
        if (n_ref % n != 0)
            throw std::invalid_argument("projection_defect_study: n_ref must nest every n");

    const Mesh fine_mesh = build_structured_mesh(n_ref);
    const FeSpace fine_vel = build_p1_space(fine_mesh, 2);
    const EllipticSolver riesz(SolverKind::poisson_dirichlet_vector, fine_vel);

    RateTable table;
    for (int n : n_list) {
        const Mesh mesh = build_structured_mesh(n);
        const FeSpace vel = build_p1_space(mesh, 2);
        RateRow row;
        row.n = n;
        row.h = mesh.h;
        for (std::size_t k = 0; k < fields.size(); ++k) {
            const VectorFn& f = fields[k];
            const Field pf = l2_project(RhsFunctional::from_density(vel, f), vel,
                                        ProjectVariant::interior);
            const VectorFn defect = [&f, pf](const Vec2& x) {
                const Vec2 v = f(x);
                return Vec2{v.x - pf.eval(x, 0), v.y - pf.eval(x, 1)};
            };
            const RhsFunctional rhs = RhsFunctional::from_density(fine_vel, defect);
            const Field wf = riesz.solve(rhs);
            const double dual = std::sqrt(std::max(0.0, rhs.load.dot(wf.coeffs)));
            const double f0 = l2_norm_function(fine_mesh, f);
            row.errors["defect_ratio_" + std::to_string(k)] = dual / f0;
        }
        table.rows.push_back(std::move(row));
    }
    table.fit();
    return table;
}

}  // namespace stokesext
