#pragma once

#include "spdecov/types.hpp"

#include <string>

namespace spdecov {

/// Partition of (0,1) into cells 0 = t_0 < t_1 < ... < t_K = 1.
class Subdivision {
public:
    /// Breakpoints must be strictly increasing with endpoints 0 and 1
    /// (tolerance 1e-12, then snapped exactly).
    explicit Subdivision(Vector breaks);

    static Subdivision uniform(Index cells);

    /// One-column CSV of breakpoints, one value per line. A single header line
    /// is tolerated if it is not numeric.
    static Subdivision from_csv(const std::string& path);

    Index cells() const noexcept { return breaks_.size() - 1; }
    const Vector& breaks() const noexcept { return breaks_; }
    Vector vertices() const { return breaks_; }
    Vector centroids() const;
    Real width(Index cell) const { return breaks_[cell + 1] - breaks_[cell]; }

    /// Maximum cell width.
    Real h() const noexcept { return h_; }
    /// max width / min width; 1 for uniform grids. Recorded, not enforced.
    Real quasi_uniformity() const noexcept { return quasi_uniformity_; }

private:
    Vector breaks_;
    Real h_ = 0;
    Real quasi_uniformity_ = 1;
};

enum class SchemeKind {
    IdentityGrid, ///< full-resolution sampling, realized as Pointwise on the fine grid
    LocalAverage, ///< cell averages against normalized indicators
    Pointwise     ///< vertex values against hat functions
};

/// A spatial sampling scheme: a subdivision plus the basis its observations
/// live in, with the basis Gram matrix cached. Immutable after construction.
class ObservationScheme {
public:
    static ObservationScheme identity_grid(Subdivision fine);
    static ObservationScheme local_average(Subdivision cells);
    static ObservationScheme pointwise(Subdivision cells);

    SchemeKind kind() const noexcept { return kind_; }
    const Subdivision& cells() const noexcept { return cells_; }

    /// Number of observation coordinates: K cells (LocalAverage) or K+1 vertices.
    Index dim() const noexcept { return kind_ == SchemeKind::LocalAverage ? cells_.cells()
                                                                          : cells_.cells() + 1; }

    /// Representative coordinates: vertices, or centroids for LocalAverage.
    Vector coordinates() const;

    /// Basis Gram matrix. LocalAverage: diag(|T_j|). Pointwise / IdentityGrid:
    /// exact hat-function integrals (tridiagonal; interior diagonal 2h/3,
    /// off-diagonal h/6, boundary diagonal h/3 on uniform grids).
    const Matrix& gram() const noexcept { return gram_; }

private:
    ObservationScheme(SchemeKind kind, Subdivision cells);

    SchemeKind kind_;
    Subdivision cells_;
    Matrix gram_;
};

/// Free-function accessor for the cached Gram matrix.
inline const Matrix& gram_matrix(const ObservationScheme& scheme) { return scheme.gram(); }

/// Piecewise-linear interpolation of nodal values at x in [0,1].
/// Requires a Pointwise or IdentityGrid scheme.
Real interpolate(const ObservationScheme& scheme, const Vector& nodal, Real x);

/// Composite-trapezoid cell averages of fine-grid samples; exact for functions
/// that are piecewise linear on the fine grid. Every cell boundary of the scheme
/// must lie on the fine grid. Requires a LocalAverage scheme.
Vector project_average(const ObservationScheme& scheme, const Vector& fine_values,
                       const Vector& fine_grid);

} // namespace spdecov
