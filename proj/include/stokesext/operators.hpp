#pragma once

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <memory>
#include <stdexcept>
#include <utility>

#include "stokesext/assemble.hpp"

namespace stokesext {

/// Right-hand-side data for the discrete solution operators: either an L2
/// density (analytic function or P1 field) or a ready nodal load <psi, phi_i>
/// over the full DOF set of the target space.
struct RhsFunctional {
    const FeSpace* space = nullptr;
    Vector load;  // full-dof load vector

    static RhsFunctional from_load(const FeSpace& s, Vector l) {
        if (l.size() != s.n_dofs()) throw std::invalid_argument("RhsFunctional: load length mismatch");
        return {&s, std::move(l)};
    }
    static RhsFunctional from_density(const FeSpace& s, const ScalarFn& f) {
        return {&s, assemble_load(s, f)};
    }
    static RhsFunctional from_density(const FeSpace& s, const VectorFn& f) {
        return {&s, assemble_load(s, f)};
    }
    static RhsFunctional from_density(const Field& f) {
        // exact P1 quadrature: <f, phi_i> = (M fbar)_i
        return {f.space, assemble_mass(*f.space).mat * f.coeffs};
    }
};

enum class SolverKind {
    poisson_dirichlet_scalar,
    poisson_dirichlet_vector,
    helmholtz,
    helmholtz_zero_mean,
    l2_projection_full,
    l2_projection_interior,
};

/// One factorized member of the discrete operator catalog
/// (T_PD,h / T_VPD,h / B_1,h / B_1,h zero-mean / pi_h / pi_0h).
/// Factorization is immutable after construction; concurrent solves are fine.
class EllipticSolver {
  public:
    EllipticSolver(SolverKind kind, const FeSpace& space) : kind_(kind), space_(&space) {
        switch (kind) {
            case SolverKind::poisson_dirichlet_scalar:
            case SolverKind::poisson_dirichlet_vector:
                if (space.n_interior_nodes() == 0)
                    throw std::invalid_argument(
                        "EllipticSolver: Dirichlet space has no interior DOFs (degenerate mesh)");
                system_ = assemble_stiffness(space, Restrict::interior).mat;
                restrict_ = Restrict::interior;
                break;
            case SolverKind::helmholtz:
                system_ = assemble_helmholtz(space).mat;
                break;
            case SolverKind::helmholtz_zero_mean: {
                if (!space.scalar())
                    throw std::invalid_argument("EllipticSolver: zero-mean variant is scalar only");
                zero_mean_ = zero_mean_constraint(space);
                const SpMat h = assemble_helmholtz(space).mat;
                std::vector<Triplet> trips;
                trips.reserve(static_cast<std::size_t>(h.nonZeros()) + 2 * static_cast<std::size_t>(h.rows()));
                for (int j = 0; j < h.outerSize(); ++j)
                    for (SpMat::InnerIterator it(h, j); it; ++it)
                        trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
                const int n = static_cast<int>(h.rows());
                for (int i = 0; i < n; ++i) {
                    trips.emplace_back(i, n, zero_mean_.weights[i]);
                    trips.emplace_back(n, i, zero_mean_.weights[i]);
                }
                system_ = SpMat(n + 1, n + 1);
                system_.setFromTriplets(trips.begin(), trips.end());
                bordered_ = true;
                break;
            }
            case SolverKind::l2_projection_full:
                system_ = assemble_mass(space, Restrict::full).mat;
                break;
            case SolverKind::l2_projection_interior:
                if (space.n_interior_nodes() == 0)
                    throw std::invalid_argument(
                        "EllipticSolver: interior projection has no interior DOFs");
                system_ = assemble_mass(space, Restrict::interior).mat;
                restrict_ = Restrict::interior;
                break;
        }
        if (bordered_) {
            lu_ = std::make_unique<Eigen::SparseLU<SpMat>>();
            lu_->compute(system_);
            if (lu_->info() != Eigen::Success)
                throw std::runtime_error("EllipticSolver: LU factorization failed");
        } else {
            ldlt_ = std::make_unique<Eigen::SimplicialLDLT<SpMat>>();
            ldlt_->compute(system_);
            if (ldlt_->info() != Eigen::Success)
                throw std::runtime_error("EllipticSolver: Cholesky factorization failed");
        }
    }

    SolverKind kind() const { return kind_; }
    const FeSpace& space() const { return *space_; }

    Field solve(const RhsFunctional& rhs) const {
        if (rhs.space != space_) throw std::invalid_argument("EllipticSolver: space mismatch");
        Vector b = restrict_ == Restrict::interior
                       ? restrict_vector(*space_, rhs.load, Restrict::interior)
                       : rhs.load;
        if (bordered_) {
            Vector bb = Vector::Zero(b.size() + 1);
            bb.head(b.size()) = b;
            b = std::move(bb);
        }
        Vector x = bordered_ ? Vector(lu_->solve(b)) : Vector(ldlt_->solve(b));

        const double bn = b.norm();
        if (bn > 0.0) {
            const double res = (system_ * x - b).norm() / bn;
            if (res > 1e-10)
                throw std::runtime_error("EllipticSolver: residual contract violated, rel residual " +
                                         std::to_string(res));
        }

        if (bordered_) x = x.head(x.size() - 1).eval();
        Field out(*space_);
        out.coeffs = restrict_ == Restrict::interior
                         ? prolong_vector(*space_, x, Restrict::interior)
                         : std::move(x);
        return out;
    }

  private:
    SolverKind kind_;
    const FeSpace* space_;
    SpMat system_;
    Restrict restrict_ = Restrict::full;
    bool bordered_ = false;
    ZeroMeanConstraint zero_mean_;
    std::unique_ptr<Eigen::SimplicialLDLT<SpMat>> ldlt_;
    std::unique_ptr<Eigen::SparseLU<SpMat>> lu_;
};

/// T_PD,h / T_VPD,h: (grad v_h, grad w_h) = <psi, w_h> over the interior
/// subspace, zero boundary coefficients.
inline Field solve_poisson_dirichlet(const RhsFunctional& rhs, const FeSpace& space) {
    const SolverKind kind = space.scalar() ? SolverKind::poisson_dirichlet_scalar
                                           : SolverKind::poisson_dirichlet_vector;
    return EllipticSolver(kind, space).solve(rhs);
}

enum class HelmholtzVariant { full, zero_mean };

/// B_1,h: (grad v, grad mu) + (v, mu) = <psi_1, mu> over Y_h (or M_h via the
/// zero-mean multiplier row).
inline Field solve_helmholtz(const RhsFunctional& rhs, const FeSpace& space,
                             HelmholtzVariant variant = HelmholtzVariant::full) {
    const SolverKind kind = variant == HelmholtzVariant::full ? SolverKind::helmholtz
                                                              : SolverKind::helmholtz_zero_mean;
    return EllipticSolver(kind, space).solve(rhs);
}

enum class ProjectVariant { full, interior };

/// pi_h / pi_0h: mass-matrix L2 projection onto X_h or X_0h.
inline Field l2_project(const RhsFunctional& rhs, const FeSpace& space,
                        ProjectVariant variant = ProjectVariant::full) {
    const SolverKind kind = variant == ProjectVariant::full ? SolverKind::l2_projection_full
                                                            : SolverKind::l2_projection_interior;
    return EllipticSolver(kind, space).solve(rhs);
}

inline Field l2_project(const Field& f, ProjectVariant variant = ProjectVariant::full) {
    return l2_project(RhsFunctional::from_density(f), *f.space, variant);
}

/// Discrete Laplacian -Lap^h u: the X_0h field xi with
/// (xi, w_h) = (grad u, grad w_h) for all interior tests.
inline Field discrete_laplacian(const Field& u) {
    const FeSpace& space = *u.space;
    if (space.components != 2)
        throw std::invalid_argument("discrete_laplacian: expects a vector field");
    if (space.n_interior_nodes() == 0)
        throw std::invalid_argument("discrete_laplacian: empty interior");
    const Vector rhs_full = assemble_stiffness(space, Restrict::full).mat * u.coeffs;
    return l2_project(RhsFunctional::from_load(space, rhs_full), space, ProjectVariant::interior);
}

/// Discrete H^-1 proxy: solve (grad w, grad v) = (g, v) over X_0h and return
/// sqrt((g, w)). Uses the stiffness-only Riesz map (H^1_0 seminorm).
inline double dual_norm_surrogate(const RhsFunctional& rhs, const FeSpace& space) {
    if (space.n_interior_nodes() == 0)
        throw std::invalid_argument("dual_norm_surrogate: empty interior");
    const Field w = solve_poisson_dirichlet(rhs, space);
    const double pairing = rhs.load.dot(w.coeffs);
    return pairing <= 0.0 ? 0.0 : std::sqrt(pairing);
}

inline double dual_norm_surrogate(const Field& g) {
    return dual_norm_surrogate(RhsFunctional::from_density(g), *g.space);
}

}  // namespace stokesext
