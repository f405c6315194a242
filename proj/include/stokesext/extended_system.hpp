#pragma once

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stokesext/operators.hpp"

namespace stokesext {

/// Scalar and vector P1 spaces over one mesh, plus the zero-mean weights.
struct StokesSpaces {
    const Mesh* mesh = nullptr;
    FeSpace scalar;    // Y_h (= X_h componentwise)
    FeSpace velocity;  // X_h, 2 components
    ZeroMeanConstraint zmc;
};

inline StokesSpaces make_spaces(const Mesh& mesh) {
    StokesSpaces s;
    s.mesh = &mesh;
    s.scalar = build_p1_space(mesh, 1);
    s.velocity = build_p1_space(mesh, 2);
    s.zmc = zero_mean_constraint(s.scalar);
    return s;
}

/// Right-hand bundle (g_hat, ell_S, g, f, psi, psi_hat, f_tri, rho, rho_hat,
/// f_hat) plus the parameter alpha and viscosity nu. Null functions mean zero
/// data. In stokes mode the bundle follows the pattern
/// g_hat = ell_S = g = psi = psi_hat = rho = rho_hat = 0, f_tri = f_hat = f.
struct StokesData {
    double alpha = 0.0;
    double nu = 1.0;
    VectorFn f;
    ScalarFn g_hat, ell_S, g, psi, psi_hat, rho, rho_hat;
    VectorFn f_tri, f_hat;
    bool stokes_mode = false;

    static StokesData stokes(double alpha, VectorFn forcing) {
        StokesData d;
        d.alpha = alpha;
        d.f = forcing;
        d.f_tri = forcing;
        d.f_hat = forcing;
        d.stokes_mode = true;
        d.validate();
        return d;
    }

    void validate() const {
        if (alpha == 1.0)
            throw std::invalid_argument("StokesData: alpha must differ from 1 (parameter singularity)");
        if (!(nu > 0.0)) throw std::invalid_argument("StokesData: nu must be positive");
    }
};

/// Which discrete equation defines z_h: tested against all of X_h (z in X_h)
/// or against X_0h with z in X_0h (the discrete-Laplacian mode).
enum class ZMode { full_Xh, interior_X0h };

enum class SystemForm { monolithic, reduced_3block, condensed_2block };

/// The ten-field discrete solution. Fields use full nodal layouts; restricted
/// components (u, q, q_hat, interior-mode z) are zero at boundary DOFs.
struct ExtendedState {
    Field p_hat, p_S, y;                  // x = (p_hat, p_S, y)
    Field u, q, q_hat, z, p, r, t;        // U = (u, q, q_hat, z, p, r, t)
    double m_S = 0.0, c_div = 0.0, m_p = 0.0;  // bordering multipliers
};

namespace layout {

/// Monolithic unknown offsets, component-blocked per field.
struct Monolithic {
    int n = 0, ni = 0, nu = 0, nz = 0;
    int p_hat = 0, p_S = 0, y = 0, u = 0, q = 0, q_hat = 0, z = 0, p = 0, r = 0, t = 0;
    int m_S = 0, c_div = 0, m_p = 0, total = 0;

    static Monolithic build(const StokesSpaces& sp, ZMode mode) {
        Monolithic L;
        L.n = sp.scalar.n_nodes();
        L.ni = sp.scalar.n_interior_nodes();
        L.nu = 2 * L.ni;
        L.nz = mode == ZMode::full_Xh ? 2 * L.n : 2 * L.ni;
        L.p_hat = 0;
        L.p_S = L.p_hat + L.n;
        L.y = L.p_S + L.n;
        L.u = L.y + L.n;
        L.q = L.u + L.nu;
        L.q_hat = L.q + L.ni;
        L.z = L.q_hat + L.ni;
        L.p = L.z + L.nz;
        L.r = L.p + L.n;
        L.t = L.r + L.n;
        L.m_S = L.t + 2 * L.n;
        L.c_div = L.m_S + 1;
        L.m_p = L.c_div + 1;
        L.total = L.m_p + 1;
        return L;
    }
};

}  // namespace layout

/// Assembled linear system in one of the three forms. The monolithic and
/// 3-block forms carry the full sparse matrix; the condensed 2-block form
/// keeps G_h(alpha) implicit through the stored factors.
struct BlockSystem {
    SystemForm form = SystemForm::monolithic;
    ZMode z_mode = ZMode::interior_X0h;
    const StokesSpaces* spaces = nullptr;
    StokesData data;
    layout::Monolithic mono;

    SpMat matrix;  // monolithic / reduced 3-block global matrix
    Vector rhs;

    // named blocks shared by the reduced and condensed paths
    SpMat A;        // A_h: interior vector stiffness
    SpMat B;        // B_h: div coupling, interior velocity rows x scalar cols
    SpMat K;        // K_h: interior vector mass (z-link block)
    SpMat C_int;    // C_h rows placed at their node ids (n x nz), unweighted
    SpMat C_bnd;    // C_{h,0} rows at node ids (n x nz)
    SpMat D;        // D_h: full scalar stiffness
    Vector w;       // zero-mean weights (constraint row)
    Vector f_int;   // <f, interior velocity basis>
    Vector psi_bar; // pressure-equation right side over all nodes
    Vector t_hat;   // pi_h f coefficients (reduced path data)
};

namespace detail {

inline void add_block(std::vector<Triplet>& trips, const SpMat& m, int row0, int col0,
                      double scale = 1.0) {
    for (int j = 0; j < m.outerSize(); ++j)
        for (SpMat::InnerIterator it(m, j); it; ++it)
            trips.emplace_back(row0 + static_cast<int>(it.row()), col0 + static_cast<int>(it.col()),
                               scale * it.value());
}

/// Add rows of m with a per-row scale (by row index), e.g. alpha on interior
/// pressure-equation rows and 1 on boundary rows.
template <typename RowScale>
void add_block_rowscaled(std::vector<Triplet>& trips, const SpMat& m, int row0, int col0,
                         RowScale scale_of_row) {
    for (int j = 0; j < m.outerSize(); ++j)
        for (SpMat::InnerIterator it(m, j); it; ++it) {
            const double s = scale_of_row(static_cast<int>(it.row()));
            if (s != 0.0)
                trips.emplace_back(row0 + static_cast<int>(it.row()),
                                   col0 + static_cast<int>(it.col()), s * it.value());
        }
}

inline Vector nodal_interpolant(const FeSpace& scalar, const ScalarFn& f) {
    if (!f) return Vector::Zero(scalar.n_dofs());
    Vector v(scalar.n_dofs());
    for (int i = 0; i < scalar.n_nodes(); ++i)
        v[i] = f(scalar.mesh->nodes[static_cast<std::size_t>(i)]);
    return v;
}

inline Vector load_or_zero(const FeSpace& s, const ScalarFn& f) {
    return f ? assemble_load(s, f) : Vector::Zero(s.n_dofs());
}

inline Vector load_or_zero(const FeSpace& s, const VectorFn& f) {
    return f ? assemble_load(s, f) : Vector::Zero(s.n_dofs());
}

/// All matrices the extended forms are built from, assembled once per call.
struct Blocks {
    SpMat D_full, M_sca, A_vec, M_vec, A0, M0, A0s, B, C_full;
    SpMat D_int, M_sca_int, C_int_rows, C_bnd_rows;
    std::vector<int> v_interior;  // interior vector dofs (component-blocked)

    explicit Blocks(const StokesSpaces& sp) {
        D_full = assemble_stiffness(sp.scalar).mat;
        M_sca = assemble_mass(sp.scalar).mat;
        A_vec = assemble_stiffness(sp.velocity).mat;
        M_vec = assemble_mass(sp.velocity).mat;
        v_interior = detail::restricted_dofs(sp.velocity, Restrict::interior);
        A0 = detail::select(A_vec, v_interior, v_interior);
        M0 = detail::select(M_vec, v_interior, v_interior);
        A0s = detail::select(D_full, sp.scalar.interior_nodes, sp.scalar.interior_nodes);
        B = assemble_div_coupling(sp.velocity, sp.scalar).mat;
        C_full = assemble_grad_coupling(sp.velocity, sp.scalar, Restrict::full).mat;

        std::vector<int> all(static_cast<std::size_t>(sp.scalar.n_nodes()));
        for (int i = 0; i < sp.scalar.n_nodes(); ++i) all[static_cast<std::size_t>(i)] = i;
        D_int = detail::select(D_full, sp.scalar.interior_nodes, all);
        M_sca_int = detail::select(M_sca, sp.scalar.interior_nodes, all);
    }

    /// Columns of C_full restricted to the z layout of the given mode, rows
    /// split into interior-node rows and boundary-node rows (kept at node ids).
    void split_grad_coupling(const StokesSpaces& sp, ZMode mode) {
        const int n = sp.scalar.n_nodes();
        const SpMat cz = mode == ZMode::full_Xh
                             ? C_full
                             : [&] {
                                   std::vector<int> rows(static_cast<std::size_t>(n));
                                   for (int i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
                                   return detail::select(C_full, rows, v_interior);
                               }();
        std::vector<Triplet> ti, tb;
        for (int j = 0; j < cz.outerSize(); ++j)
            for (SpMat::InnerIterator it(cz, j); it; ++it) {
                const int node = static_cast<int>(it.row());
                auto& dst = sp.scalar.interior_pos[static_cast<std::size_t>(node)] >= 0 ? ti : tb;
                dst.emplace_back(node, static_cast<int>(it.col()), it.value());
            }
        C_int_rows = SpMat(n, cz.cols());
        C_int_rows.setFromTriplets(ti.begin(), ti.end());
        C_bnd_rows = SpMat(n, cz.cols());
        C_bnd_rows.setFromTriplets(tb.begin(), tb.end());
    }
};

struct Loads {
    Vector g_hat_nodal, ell_S_nodal;
    Vector g, psi, psi_hat, rho, rho_hat;  // scalar loads, full nodal
    Vector f, f_tri, f_hat;                // vector loads, full layout
    Vector f_tri_h, f_hat_h;               // pi_h projections (coefficients)

    Loads(const StokesSpaces& sp, const StokesData& d) {
        g_hat_nodal = nodal_interpolant(sp.scalar, d.g_hat);
        ell_S_nodal = nodal_interpolant(sp.scalar, d.ell_S);
        g = load_or_zero(sp.scalar, d.g);
        psi = load_or_zero(sp.scalar, d.psi);
        psi_hat = load_or_zero(sp.scalar, d.psi_hat);
        rho = load_or_zero(sp.scalar, d.rho);
        rho_hat = load_or_zero(sp.scalar, d.rho_hat);
        f = load_or_zero(sp.velocity, d.f);
        f_tri = load_or_zero(sp.velocity, d.f_tri);
        // in stokes mode f_hat and f_tri are the same density; reuse the load
        // so their projections cancel exactly
        f_hat = d.stokes_mode ? f_tri : load_or_zero(sp.velocity, d.f_hat);

        Eigen::SimplicialLDLT<SpMat> mass(assemble_mass(sp.velocity).mat);
        f_tri_h = mass.solve(f_tri);
        f_hat_h = d.stokes_mode ? f_tri_h : Vector(mass.solve(f_hat));
    }
};

}  // namespace detail

/// Monolithic extended system over the ten discrete fields. Assembles the
/// identities, the divergence constraint tested against M_h, the momentum
/// equation, the alpha- and q_hat-equations, the z-defining equation of the
/// selected mode, the pressure equation over Y_h in its interior/boundary
/// split, the r equation in H1-product form, and the t projection, plus the
/// zero-mean rows and their bordering multipliers.
inline BlockSystem assemble_monolithic(const StokesData& data, const StokesSpaces& spaces,
                                       ZMode z_mode = ZMode::interior_X0h) {
    data.validate();
    const FeSpace& S = spaces.scalar;
    const int n = S.n_nodes(), ni = S.n_interior_nodes();
    if (ni == 0) throw std::invalid_argument("assemble_monolithic: mesh has no interior nodes");

    detail::Blocks blk(spaces);
    blk.split_grad_coupling(spaces, z_mode);
    detail::Loads loads(spaces, data);
    const layout::Monolithic L = layout::Monolithic::build(spaces, z_mode);
    const Vector& w = spaces.zmc.weights;
    const double alpha = data.alpha;

    // row offsets, in equation order
    const int rE1 = 0, rE2 = n, rE3 = 2 * n, rE4 = 3 * n;
    const int rE5 = rE4 + L.nu, rE6 = rE5 + ni, rE7 = rE6 + ni;
    const int rW8 = rE7 + L.nz, rW9 = rW8 + n, rE10 = rW9 + n;
    const int rC1 = rE10 + 2 * n, rC2 = rC1 + 1, rC3 = rC2 + 1;

    std::vector<Triplet> T;
    T.reserve(static_cast<std::size_t>(blk.D_full.nonZeros()) * 8);
    Vector rhs = Vector::Zero(L.total);

    auto is_interior = [&](int node) { return S.interior_pos[static_cast<std::size_t>(node)] >= 0; };

    // E1: p - q - p_hat = g_hat (nodal identity over Y_h)
    for (int i = 0; i < n; ++i) {
        T.emplace_back(rE1 + i, L.p + i, 1.0);
        T.emplace_back(rE1 + i, L.p_hat + i, -1.0);
        const int qi = S.interior_pos[static_cast<std::size_t>(i)];
        if (qi >= 0) T.emplace_back(rE1 + i, L.q + qi, -1.0);
        rhs[rE1 + i] = loads.g_hat_nodal[i];
    }
    // E2: p_S - p + m_S = ell_S (nodal identity in L2_0, mean absorbed by m_S)
    for (int i = 0; i < n; ++i) {
        T.emplace_back(rE2 + i, L.p_S + i, 1.0);
        T.emplace_back(rE2 + i, L.p + i, -1.0);
        T.emplace_back(rE2 + i, L.m_S, 1.0);
        rhs[rE2 + i] = loads.ell_S_nodal[i];
    }
    // E3: (div u - y, mu) = (g, mu) tested against M_h (all rows + c_div)
    detail::add_block(T, SpMat(blk.B.transpose()), rE3, L.u);
    detail::add_block(T, blk.M_sca, rE3, L.y, -1.0);
    for (int i = 0; i < n; ++i) {
        T.emplace_back(rE3 + i, L.c_div, -w[i]);
        rhs[rE3 + i] = loads.g[i];
    }
    // E4: momentum (grad u, grad w) - (p_S, div w) = <f, w>
    detail::add_block(T, blk.A0, rE4, L.u);
    detail::add_block(T, blk.B, rE4, L.p_S, -1.0);
    rhs.segment(rE4, L.nu) = restrict_vector(spaces.velocity, loads.f, Restrict::interior);
    // E5: alpha (z, grad l) - (t, grad l) + (grad q, grad l) = <psi, l>, interior tests
    {
        std::vector<int> all_z(static_cast<std::size_t>(L.nz));
        for (int k = 0; k < L.nz; ++k) all_z[static_cast<std::size_t>(k)] = k;
        const SpMat c_int_sel = detail::select(blk.C_int_rows, S.interior_nodes, all_z);
        std::vector<int> all_v(static_cast<std::size_t>(2 * n));
        for (int k = 0; k < 2 * n; ++k) all_v[static_cast<std::size_t>(k)] = k;
        const SpMat c_full_int = detail::select(blk.C_full, S.interior_nodes, all_v);
        detail::add_block(T, c_int_sel, rE5, L.z, alpha);
        detail::add_block(T, c_full_int, rE5, L.t, -1.0);
        detail::add_block(T, blk.A0s, rE5, L.q);
        rhs.segment(rE5, ni) = restrict_vector(S, loads.psi, Restrict::interior);

        // E6: (grad q_hat, grad l) + (grad p, grad l) = <psi_hat, l>
        detail::add_block(T, blk.A0s, rE6, L.q_hat);
        detail::add_block(T, blk.D_int, rE6, L.p);
        rhs.segment(rE6, ni) = restrict_vector(S, loads.psi_hat, Restrict::interior);

        // E7: z-defining equation, variant per mode
        if (z_mode == ZMode::full_Xh) {
            detail::add_block(T, blk.M_vec, rE7, L.z);
            detail::add_block(T, SpMat(blk.C_full.transpose()), rE7, L.p);
            rhs.segment(rE7, L.nz) = loads.f_tri;
        } else {
            detail::add_block(T, blk.M0, rE7, L.z);
            detail::add_block(T, blk.B, rE7, L.p, -1.0);
            rhs.segment(rE7, L.nz) = restrict_vector(spaces.velocity, loads.f_tri, Restrict::interior);
        }

        // W8: pressure equation over Y_h, interior rows in the
        // parameterized form, boundary rows pairing against Xi_h gradients
        detail::add_block_rowscaled(T, blk.C_int_rows, rW8, L.z,
                                    [&](int) { return alpha; });
        detail::add_block_rowscaled(T, blk.C_bnd_rows, rW8, L.z, [&](int) { return 1.0; });
        detail::add_block(T, blk.C_full, rW8, L.t, -1.0);
        detail::add_block(T, blk.D_full, rW8, L.p);
        detail::add_block_rowscaled(T, blk.M_sca, rW8, L.r,
                                    [&](int row) { return is_interior(row) ? -1.0 : 0.0; });
        const Vector bnd_rhs = blk.C_full * (loads.f_tri_h - loads.f_hat_h);
        for (int i = 0; i < n; ++i) {
            T.emplace_back(rW8 + i, L.m_p, w[i]);
            rhs[rW8 + i] = is_interior(i)
                               ? loads.psi[i] + loads.psi_hat[i] - loads.rho_hat[i]
                               : bnd_rhs[i];
        }

        // W9: ((r, phi))_1 = <psi_r~, phi> (data-only right side)
        detail::add_block(T, blk.D_full, rW9, L.r);
        detail::add_block(T, blk.M_sca, rW9, L.r);
        rhs.segment(rW9, n) = blk.C_full * (loads.f_hat_h - loads.f_tri_h) +
                              blk.D_full * loads.g_hat_nodal + loads.rho + loads.rho_hat;

        // E10: (t, w) = (f_hat, w) over X_h
        detail::add_block(T, blk.M_vec, rE10, L.t);
        rhs.segment(rE10, 2 * n) = loads.f_hat;
    }
    // zero-mean constraint rows for p_S, y, p
    for (int i = 0; i < n; ++i) {
        T.emplace_back(rC1, L.p_S + i, w[i]);
        T.emplace_back(rC2, L.y + i, w[i]);
        T.emplace_back(rC3, L.p + i, w[i]);
    }

    BlockSystem sys;
    sys.form = SystemForm::monolithic;
    sys.z_mode = z_mode;
    sys.spaces = &spaces;
    sys.data = data;
    sys.mono = L;
    sys.matrix = SpMat(L.total, L.total);
    sys.matrix.setFromTriplets(T.begin(), T.end());
    sys.rhs = std::move(rhs);
    sys.A = blk.A0;
    sys.B = blk.B;
    sys.K = blk.M0;
    sys.C_int = blk.C_int_rows;
    sys.C_bnd = blk.C_bnd_rows;
    sys.D = blk.D_full;
    sys.w = w;
    return sys;
}

/// Reduced 3-block system (stokes-mode data, interior z-mode): unknowns
/// (u, z, p) plus the pressure bordering multiplier. Row 1 is the momentum
/// equation, row 2 the z-link A u - K z = 0, row 3 the stacked parameterized
/// pressure equation [alpha C_h; C_{h,0}] z + D_h p = psi_bar with
/// psi_bar = (pi_h f, grad basis) and r_h = 0.
inline BlockSystem assemble_reduced_3block(const StokesData& data, const StokesSpaces& spaces) {
    data.validate();
    if (!data.stokes_mode)
        throw std::invalid_argument("assemble_reduced_3block: requires stokes-mode data");
    const FeSpace& S = spaces.scalar;
    const int n = S.n_nodes(), ni = S.n_interior_nodes();
    if (ni == 0) throw std::invalid_argument("assemble_reduced_3block: mesh has no interior nodes");

    detail::Blocks blk(spaces);
    blk.split_grad_coupling(spaces, ZMode::interior_X0h);
    const Vector& w = spaces.zmc.weights;
    const int nu = 2 * ni, nz = 2 * ni;
    const int total = nu + nz + n + 1;

    const Vector load_f = detail::load_or_zero(spaces.velocity, data.f);
    Eigen::SimplicialLDLT<SpMat> mass(assemble_mass(spaces.velocity).mat);
    const Vector t_hat = mass.solve(load_f);
    const Vector psi_bar = blk.C_full * t_hat;

    std::vector<Triplet> T;
    Vector rhs = Vector::Zero(total);
    const int rU = 0, rZ = nu, rP = nu + nz, rC = total - 1;
    const int cU = 0, cZ = nu, cP = nu + nz, cM = total - 1;

    detail::add_block(T, blk.A0, rU, cU);
    detail::add_block(T, blk.B, rU, cP, -1.0);
    rhs.segment(rU, nu) = restrict_vector(spaces.velocity, load_f, Restrict::interior);

    detail::add_block(T, blk.A0, rZ, cU);
    detail::add_block(T, blk.M0, rZ, cZ, -1.0);

    detail::add_block_rowscaled(T, blk.C_int_rows, rP, cZ, [&](int) { return data.alpha; });
    detail::add_block_rowscaled(T, blk.C_bnd_rows, rP, cZ, [&](int) { return 1.0; });
    detail::add_block(T, blk.D_full, rP, cP);
    for (int i = 0; i < n; ++i) {
        T.emplace_back(rP + i, cM, w[i]);
        T.emplace_back(rC, cP + i, w[i]);
        rhs[rP + i] = psi_bar[i];
    }

    BlockSystem sys;
    sys.form = SystemForm::reduced_3block;
    sys.z_mode = ZMode::interior_X0h;
    sys.spaces = &spaces;
    sys.data = data;
    sys.mono = layout::Monolithic::build(spaces, ZMode::interior_X0h);
    sys.matrix = SpMat(total, total);
    sys.matrix.setFromTriplets(T.begin(), T.end());
    sys.rhs = std::move(rhs);
    sys.A = blk.A0;
    sys.B = blk.B;
    sys.K = blk.M0;
    sys.C_int = blk.C_int_rows;
    sys.C_bnd = blk.C_bnd_rows;
    sys.D = blk.D_full;
    sys.w = w;
    sys.f_int = restrict_vector(spaces.velocity, load_f, Restrict::interior);
    sys.psi_bar = psi_bar;
    sys.t_hat = t_hat;
    return sys;
}

/// Condensed 2-block form: z is eliminated through the K_h mass solve, so the
/// pressure block becomes G_h(alpha) = [alpha C_h; C_{h,0}] K_h^{-1} A_h,
/// applied implicitly (never densified).
inline BlockSystem condense_2block(const BlockSystem& sys3) {
    if (sys3.form != SystemForm::reduced_3block)
        throw std::invalid_argument("condense_2block: expects a reduced 3-block system");
    BlockSystem sys = sys3;
    sys.form = SystemForm::condensed_2block;
    sys.matrix.resize(0, 0);
    sys.rhs.resize(0);
    return sys;
}

/// Action of G_h(alpha) on interior velocity coefficients.
inline Vector gh_alpha_apply(const BlockSystem& sys, double alpha, const Vector& u_bar) {
    Eigen::SimplicialLDLT<SpMat> kinv(sys.K);
    const Vector z_bar = kinv.solve(sys.A * u_bar);
    return alpha * (sys.C_int * z_bar) + sys.C_bnd * z_bar;
}

namespace detail {

/// Right-preconditioned GMRES (no restart) for the implicit Schur solve.
template <typename Op, typename Prec>
Vector gmres(const Op& apply, const Prec& precond, const Vector& b, double tol, int maxit,
             const std::string& context) {
    const int n = static_cast<int>(b.size());
    const double bnorm = b.norm();
    if (bnorm == 0.0) return Vector::Zero(n);

    std::vector<Vector> V;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(maxit + 1, maxit);
    Vector cs = Vector::Zero(maxit), sn = Vector::Zero(maxit), g = Vector::Zero(maxit + 1);

    V.push_back(b / bnorm);
    g[0] = bnorm;
    int k = 0;
    for (; k < maxit; ++k) {
        Vector wv = apply(precond(V[static_cast<std::size_t>(k)]));
        for (int i = 0; i <= k; ++i) {
            H(i, k) = wv.dot(V[static_cast<std::size_t>(i)]);
            wv -= H(i, k) * V[static_cast<std::size_t>(i)];
        }
        H(k + 1, k) = wv.norm();
        if (H(k + 1, k) > 0.0) V.push_back(wv / H(k + 1, k));

        for (int i = 0; i < k; ++i) {
            const double t = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
            H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
            H(i, k) = t;
        }
        const double d = std::hypot(H(k, k), H(k + 1, k));
        cs[k] = H(k, k) / d;
        sn[k] = H(k + 1, k) / d;
        H(k, k) = d;
        H(k + 1, k) = 0.0;
        g[k + 1] = -sn[k] * g[k];
        g[k] = cs[k] * g[k];
        if (std::abs(g[k + 1]) / bnorm < tol) {
            ++k;
            break;
        }
        if (H(k, k) == 0.0 || V.size() == static_cast<std::size_t>(k) + 1) {
            ++k;
            break;
        }
    }
    Vector yv = Vector::Zero(k);
    for (int i = k - 1; i >= 0; --i) {
        double s = g[i];
        for (int j = i + 1; j < k; ++j) s -= H(i, j) * yv[j];
        yv[i] = s / H(i, i);
    }
    Vector x = Vector::Zero(n);
    for (int i = 0; i < k; ++i) x += yv[i] * V[static_cast<std::size_t>(i)];
    x = precond(x);
    const double res = (apply(x) - b).norm() / bnorm;
    if (res > 50.0 * tol)
        throw std::runtime_error("gmres: stalled at relative residual " + std::to_string(res) +
                                 " (" + context + ")");
    return x;
}

inline void check_residual(const SpMat& m, const Vector& x, const Vector& b,
                           const std::string& context) {
    const double bn = b.norm();
    if (bn == 0.0) return;
    const double res = (m * x - b).norm() / bn;
    if (res > 1e-10)
        throw std::runtime_error("solve: relative residual " + std::to_string(res) +
                                 " exceeds 1e-10 (" + context + ")");
}

inline Vector sparse_lu_solve(const SpMat& m, const Vector& b, const std::string& context) {
    Eigen::SparseLU<SpMat> lu;
    lu.compute(m);
    if (lu.info() != Eigen::Success)
        throw std::runtime_error("solve: sparse factorization failed (" + context + ")");
    Vector x = lu.solve(b);
    x += lu.solve(b - m * x);  // one refinement step
    check_residual(m, x, b, context);
    return x;
}

}  // namespace detail

/// Solve an assembled system. Monolithic solves unpack the full ten-field
/// state; reduced/condensed solves populate (u, z, p) and the multiplier.
inline ExtendedState solve(const BlockSystem& sys) {
    const StokesSpaces& sp = *sys.spaces;
    const FeSpace& S = sp.scalar;
    const FeSpace& V = sp.velocity;
    const int n = S.n_nodes(), ni = S.n_interior_nodes();
    const std::string context = "form=" + std::to_string(static_cast<int>(sys.form)) +
                                " alpha=" + std::to_string(sys.data.alpha) +
                                " n_nodes=" + std::to_string(n);

    ExtendedState st;
    st.p_hat = Field(S);
    st.p_S = Field(S);
    st.y = Field(S);
    st.u = Field(V);
    st.q = Field(S);
    st.q_hat = Field(S);
    st.z = Field(V);
    st.p = Field(S);
    st.r = Field(S);
    st.t = Field(V);

    auto unpack_restricted = [&](const FeSpace& space, const Vector& x, int offset, int count) {
        Vector sub = x.segment(offset, count);
        return prolong_vector(space, sub, Restrict::interior);
    };

    if (sys.form == SystemForm::monolithic) {
        const Vector x = detail::sparse_lu_solve(sys.matrix, sys.rhs, "monolithic " + context);
        const layout::Monolithic& L = sys.mono;
        st.p_hat.coeffs = x.segment(L.p_hat, n);
        st.p_S.coeffs = x.segment(L.p_S, n);
        st.y.coeffs = x.segment(L.y, n);
        st.u.coeffs = unpack_restricted(V, x, L.u, L.nu);
        st.q.coeffs = unpack_restricted(S, x, L.q, ni);
        st.q_hat.coeffs = unpack_restricted(S, x, L.q_hat, ni);
        st.z.coeffs = sys.z_mode == ZMode::full_Xh ? Vector(x.segment(L.z, 2 * n))
                                                   : unpack_restricted(V, x, L.z, L.nz);
        st.p.coeffs = x.segment(L.p, n);
        st.r.coeffs = x.segment(L.r, n);
        st.t.coeffs = x.segment(L.t, 2 * n);
        st.m_S = x[L.m_S];
        st.c_div = x[L.c_div];
        st.m_p = x[L.m_p];
        return st;
    }

    if (sys.form == SystemForm::reduced_3block) {
        const Vector x = detail::sparse_lu_solve(sys.matrix, sys.rhs, "reduced3 " + context);
        const int nu = 2 * ni;
        st.u.coeffs = unpack_restricted(V, x, 0, nu);
        st.z.coeffs = unpack_restricted(V, x, nu, nu);
        st.p.coeffs = x.segment(2 * nu, n);
        st.m_p = x[2 * nu + n];
        st.t.coeffs = sys.t_hat;
        return st;
    }

    // condensed 2-block: pressure Schur complement with implicit G_h(alpha)
    Eigen::SimplicialLDLT<SpMat> a_fac(sys.A);
    Eigen::SimplicialLDLT<SpMat> k_fac(sys.K);
    if (a_fac.info() != Eigen::Success || k_fac.info() != Eigen::Success)
        throw std::runtime_error("solve: SPD factorization failed (condensed " + context + ")");

    const double alpha = sys.data.alpha;
    auto apply_c = [&](const Vector& zb) {
        return Vector(alpha * (sys.C_int * zb) + sys.C_bnd * zb);
    };
    // bordered Schur operator on [p; m]
    auto apply = [&](const Vector& pm) {
        Vector p = pm.head(n);
        Vector out(n + 1);
        out.head(n) = sys.D * p + apply_c(k_fac.solve(sys.B * p)) + pm[n] * sys.w;
        out[n] = sys.w.dot(p);
        return out;
    };
    // preconditioner: bordered Neumann-Laplacian
    SpMat prec_mat(n + 1, n + 1);
    {
        std::vector<Triplet> T;
        detail::add_block(T, sys.D, 0, 0);
        for (int i = 0; i < n; ++i) {
            T.emplace_back(i, n, sys.w[i]);
            T.emplace_back(n, i, sys.w[i]);
        }
        prec_mat.setFromTriplets(T.begin(), T.end());
    }
    Eigen::SparseLU<SpMat> prec_fac;
    prec_fac.compute(prec_mat);
    if (prec_fac.info() != Eigen::Success)
        throw std::runtime_error("solve: preconditioner factorization failed (" + context + ")");
    auto precond = [&](const Vector& v) { return Vector(prec_fac.solve(v)); };

    Vector b = Vector::Zero(n + 1);
    b.head(n) = sys.psi_bar - apply_c(k_fac.solve(sys.f_int));
    const Vector pm =
        detail::gmres(apply, precond, b, 1e-13, std::min(400, n + 1), "condensed " + context);

    const Vector p_bar = pm.head(n);
    const Vector u_bar = a_fac.solve(sys.f_int + sys.B * p_bar);
    const Vector z_bar = k_fac.solve(sys.A * u_bar);

    st.u.coeffs = prolong_vector(V, u_bar, Restrict::interior);
    st.z.coeffs = prolong_vector(V, z_bar, Restrict::interior);
    st.p.coeffs = p_bar;
    st.m_p = pm[n];
    st.t.coeffs = sys.t_hat;
    return st;
}

/// Recover the remaining seven fields from a reduced solve's (u, z, p).
inline ExtendedState recover_auxiliary(const Field& u, const Field& z, const Field& p,
                                       const StokesData& data, const StokesSpaces& spaces) {
    const FeSpace& S = spaces.scalar;
    const FeSpace& V = spaces.velocity;
    detail::Blocks blk(spaces);
    blk.split_grad_coupling(spaces, ZMode::interior_X0h);
    detail::Loads loads(spaces, data);
    const Vector& w = spaces.zmc.weights;
    const double measure = spaces.zmc.domain_measure;

    ExtendedState st;
    st.u = u;
    st.z = z;
    st.p = p;

    // t_h = pi_h f_hat
    st.t = Field(V, Eigen::SimplicialLDLT<SpMat>(blk.M_vec).solve(loads.f_hat));

    // r_h from ((r, phi))_1 = <psi_r~, phi>; identically zero for stokes data
    const Vector psi_r = blk.C_full * (loads.f_hat_h - loads.f_tri_h) +
                         blk.D_full * loads.g_hat_nodal + loads.rho + loads.rho_hat;
    st.r = Field(S, Eigen::SimplicialLDLT<SpMat>(SpMat(blk.D_full + blk.M_sca)).solve(psi_r));

    // q from the alpha-equation, q_hat from the q_hat-equation (interior solves)
    Eigen::SimplicialLDLT<SpMat> a0s(blk.A0s);
    const Vector z_int = restrict_vector(V, z.coeffs, Restrict::interior);
    std::vector<int> all_z(static_cast<std::size_t>(2 * S.n_interior_nodes()));
    for (std::size_t k = 0; k < all_z.size(); ++k) all_z[k] = static_cast<int>(k);
    const SpMat c_int_sel = detail::select(blk.C_int_rows, S.interior_nodes, all_z);
    std::vector<int> all_v(static_cast<std::size_t>(2 * S.n_nodes()));
    for (std::size_t k = 0; k < all_v.size(); ++k) all_v[k] = static_cast<int>(k);
    const SpMat c_full_int = detail::select(blk.C_full, S.interior_nodes, all_v);

    const Vector rq = restrict_vector(S, loads.psi, Restrict::interior) -
                      data.alpha * (c_int_sel * z_int) + c_full_int * st.t.coeffs;
    st.q = Field(S, prolong_vector(S, a0s.solve(rq), Restrict::interior));

    const Vector rqh =
        restrict_vector(S, loads.psi_hat, Restrict::interior) - blk.D_int * p.coeffs;
    st.q_hat = Field(S, prolong_vector(S, a0s.solve(rqh), Restrict::interior));

    // p_hat nodally from the first identity
    st.p_hat = Field(S, Vector(p.coeffs - st.q.coeffs - loads.g_hat_nodal));

    // y in M_h from the divergence equation (bordered mass solve)
    {
        const int n = S.n_nodes();
        SpMat m(n + 1, n + 1);
        std::vector<Triplet> T;
        detail::add_block(T, blk.M_sca, 0, 0);
        for (int i = 0; i < n; ++i) {
            T.emplace_back(i, n, w[i]);
            T.emplace_back(n, i, w[i]);
        }
        m.setFromTriplets(T.begin(), T.end());
        Vector b = Vector::Zero(n + 1);
        b.head(n) = blk.B.transpose() * restrict_vector(V, u.coeffs, Restrict::interior) - loads.g;
        const Vector x = detail::sparse_lu_solve(m, b, "recover_auxiliary y");
        st.y = Field(S, Vector(x.head(n)));
        st.c_div = x[n];
    }

    // p_S = p + ell_S with the mean defect absorbed by m_S
    st.m_S = w.dot(p.coeffs + loads.ell_S_nodal) / measure;
    st.p_S = Field(S, Vector(p.coeffs + loads.ell_S_nodal - Vector::Constant(S.n_nodes(), st.m_S)));
    return st;
}

/// Residual norms of the discrete equations at a given state, each scaled by
/// the magnitude of its contributing terms. Keys follow the equation roles.
inline std::map<std::string, double> extended_residuals(const ExtendedState& st,
                                                        const StokesData& data,
                                                        const StokesSpaces& spaces, ZMode z_mode) {
    const FeSpace& S = spaces.scalar;
    const FeSpace& V = spaces.velocity;
    detail::Blocks blk(spaces);
    blk.split_grad_coupling(spaces, z_mode);
    detail::Loads loads(spaces, data);
    const Vector& w = spaces.zmc.weights;
    const double alpha = data.alpha;
    const int n = S.n_nodes();

    std::map<std::string, double> out;
    auto rel = [](const Vector& res, std::initializer_list<double> scales) {
        double denom = 0.0;
        for (double s : scales) denom = std::max(denom, s);
        return res.norm() / std::max(denom, 1.0);
    };

    const Vector u_int = restrict_vector(V, st.u.coeffs, Restrict::interior);
    const Vector z_cols = z_mode == ZMode::full_Xh
                              ? st.z.coeffs
                              : restrict_vector(V, st.z.coeffs, Restrict::interior);

    // identities
    out["identity_p"] = rel(st.p.coeffs - st.q.coeffs - st.p_hat.coeffs - loads.g_hat_nodal,
                            {st.p.coeffs.norm(), st.p_hat.coeffs.norm()});
    out["identity_pS"] =
        rel(st.p_S.coeffs - st.p.coeffs + Vector::Constant(n, st.m_S) - loads.ell_S_nodal,
            {st.p.coeffs.norm()});
    out["divergence"] = rel(blk.B.transpose() * u_int - blk.M_sca * st.y.coeffs -
                                st.c_div * w - loads.g,
                            {(blk.B.transpose() * u_int).norm(), 1.0});
    out["momentum"] = rel(blk.A0 * u_int - blk.B * st.p_S.coeffs -
                              restrict_vector(V, loads.f, Restrict::interior),
                          {loads.f.norm(), (blk.A0 * u_int).norm()});

    // alpha-equation and q_hat-equation (interior tests)
    {
        std::vector<int> all_z(static_cast<std::size_t>(z_cols.size()));
        for (std::size_t k = 0; k < all_z.size(); ++k) all_z[k] = static_cast<int>(k);
        const SpMat c_int_sel = detail::select(blk.C_int_rows, S.interior_nodes, all_z);
        std::vector<int> all_v(static_cast<std::size_t>(2 * n));
        for (std::size_t k = 0; k < all_v.size(); ++k) all_v[k] = static_cast<int>(k);
        const SpMat c_full_int = detail::select(blk.C_full, S.interior_nodes, all_v);
        const SpMat a0s = blk.A0s;
        const Vector q_int = restrict_vector(S, st.q.coeffs, Restrict::interior);
        const Vector qh_int = restrict_vector(S, st.q_hat.coeffs, Restrict::interior);

        out["alpha_eq"] = rel(alpha * (c_int_sel * z_cols) - c_full_int * st.t.coeffs +
                                  a0s * q_int - restrict_vector(S, loads.psi, Restrict::interior),
                              {(a0s * q_int).norm(), st.t.coeffs.norm(), 1.0});
        out["qhat_eq"] = rel(a0s * qh_int + blk.D_int * st.p.coeffs -
                                 restrict_vector(S, loads.psi_hat, Restrict::interior),
                             {(blk.D_int * st.p.coeffs).norm(), 1.0});
    }

    // z-defining equation
    if (z_mode == ZMode::full_Xh) {
        out["z_eq"] = rel(blk.M_vec * st.z.coeffs + blk.C_full.transpose() * st.p.coeffs - loads.f_tri,
                          {loads.f_tri.norm(), (blk.M_vec * st.z.coeffs).norm()});
    } else {
        out["z_eq"] = rel(blk.M0 * z_cols - blk.B * st.p.coeffs -
                              restrict_vector(V, loads.f_tri, Restrict::interior),
                          {loads.f_tri.norm(), (blk.M0 * z_cols).norm()});
    }

    // pressure equation over Y_h (interior/boundary split) and the r equation
    {
        Vector res = Vector::Zero(n);
        const Vector ci = alpha * (blk.C_int_rows * z_cols);
        const Vector cb = blk.C_bnd_rows * z_cols;
        const Vector dt = blk.D_full * st.p.coeffs;
        const Vector ct = blk.C_full * st.t.coeffs;
        const Vector mr = blk.M_sca * st.r.coeffs;
        const Vector bnd_rhs = blk.C_full * (loads.f_tri_h - loads.f_hat_h);
        for (int i = 0; i < n; ++i) {
            const bool interior = S.interior_pos[static_cast<std::size_t>(i)] >= 0;
            res[i] = interior ? ci[i] - ct[i] + dt[i] - mr[i] + st.m_p * w[i] -
                                    (loads.psi[i] + loads.psi_hat[i] - loads.rho_hat[i])
                              : cb[i] - ct[i] + dt[i] + st.m_p * w[i] - bnd_rhs[i];
        }
        out["pressure_eq"] = rel(res, {dt.norm(), ct.norm(), 1.0});

        const Vector psi_r = blk.C_full * (loads.f_hat_h - loads.f_tri_h) +
                             blk.D_full * loads.g_hat_nodal + loads.rho + loads.rho_hat;
        out["r_eq"] = rel((blk.D_full + blk.M_sca) * st.r.coeffs - psi_r,
                          {st.r.coeffs.norm(), psi_r.norm(), 1.0});
        // literal r equation (grad_miu_r form): exact consequence in stokes mode
        const Vector q_sum = st.q.coeffs + st.q_hat.coeffs;
        out["r_eq_literal"] = rel(blk.M_sca * st.r.coeffs + blk.D_full * q_sum - loads.rho_hat,
                                  {(blk.D_full * q_sum).norm(), 1.0});
    }

    // t projection
    out["t_eq"] = rel(blk.M_vec * st.t.coeffs - loads.f_hat,
                      {loads.f_hat.norm(), (blk.M_vec * st.t.coeffs).norm()});

    // zero-mean constraints
    out["mean_pS"] = std::abs(w.dot(st.p_S.coeffs)) / std::max(1.0, st.p_S.coeffs.norm());
    out["mean_y"] = std::abs(w.dot(st.y.coeffs)) / std::max(1.0, st.y.coeffs.norm());
    out["mean_p"] = std::abs(w.dot(st.p.coeffs)) / std::max(1.0, st.p.coeffs.norm());
    return out;
}

/// max over interior basis tests of |(z_h, grad lambda)| / (||z||_0 |lambda|_1):
/// the discrete counterpart of the exact orthogonality (z, grad phi) = 0.
inline double z_gradient_orthogonality_gap(const Field& z, const StokesSpaces& spaces) {
    const FeSpace& S = spaces.scalar;
    detail::Blocks blk(spaces);
    const Vector pair = blk.C_full * z.coeffs;  // (z, grad lambda_i) over all nodes
    const double z0 = std::sqrt(z.coeffs.dot(blk.M_vec * z.coeffs));
    if (z0 == 0.0) return 0.0;
    double gap = 0.0;
    for (int node : S.interior_nodes) {
        const double lam_h1 = std::sqrt(blk.D_full.coeff(node, node));
        gap = std::max(gap, std::abs(pair[node]) / (z0 * lam_h1));
    }
    return gap;
}

}  // namespace stokesext
