#pragma once

#include "spdecov/types.hpp"

namespace spdecov {

enum class Boundary { Dirichlet, Neumann };

/// Self-adjoint elliptic operator A = base_shift - diffusivity * d^2/dx^2 on (0,1),
/// represented through its eigenvalue sequence and L^2-orthonormal eigenbasis:
///
///   Dirichlet:  lambda_j = base_shift + diffusivity (j pi)^2,  e_j = sqrt(2) sin(j pi x),  j >= 1
///   Neumann:    lambda_0 = base_shift, e_0 = 1;
///               lambda_j = base_shift + diffusivity (j pi)^2,  e_j = sqrt(2) cos(j pi x),  j >= 1
///
/// mode_count is the truncation level N: Dirichlet keeps modes 1..N, Neumann 0..N-1.
/// All eigenvalues must be strictly positive, so Neumann requires base_shift > 0.
/// Immutable after construction; safe to share across threads.
class SpectralOperator {
public:
    SpectralOperator(Boundary boundary, Real base_shift, Real diffusivity, Index mode_count);

    /// lambda_j. Throws std::out_of_range for j outside the admissible mode range.
    Real eigenvalue(Index j) const;

    /// e_j(x). Throws std::domain_error for x outside [0,1].
    Real eigenfunction_value(Index j, Real x) const;

    /// exp(-lambda_j t). Throws std::domain_error for t < 0.
    Real semigroup_factor(Index j, Real t) const;

    Boundary boundary() const noexcept { return boundary_; }
    Real base_shift() const noexcept { return base_shift_; }
    Real diffusivity() const noexcept { return diffusivity_; }
    Index mode_count() const noexcept { return mode_count_; }

    /// First admissible mode index: 0 for Neumann, 1 for Dirichlet.
    Index first_mode() const noexcept { return boundary_ == Boundary::Neumann ? 0 : 1; }
    Index last_mode() const noexcept { return first_mode() + mode_count_ - 1; }

    /// All admissible eigenvalues in mode order (size mode_count).
    Vector eigenvalues() const;

    /// Basis evaluation matrix B with B(j, k) = e_{first_mode + j}(grid[k]),
    /// size mode_count x grid.size(). Throws std::domain_error if any grid point
    /// falls outside [0,1].
    Matrix basis_matrix(const Vector& grid) const;

    /// Exact eigenfunction cell averages: entry (j, c) is the mean of
    /// e_{first_mode + j} over [breaks[c], breaks[c+1]]. breaks must be strictly
    /// increasing inside [0,1].
    Matrix basis_cell_averages(const Vector& breaks) const;

private:
    void check_mode(Index j) const;

    Boundary boundary_;
    Real base_shift_;
    Real diffusivity_;
    Index mode_count_;
};

} // namespace spdecov
