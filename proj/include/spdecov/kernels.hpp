#pragma once

#include "spdecov/observation.hpp"
#include "spdecov/spectral.hpp"

#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace spdecov {

struct MaternParams {
    Real variance;   ///< sigma^2 > 0
    Real smoothness; ///< nu > 0
    Real range;      ///< rho > 0
};

/// Stationary Matern covariance on [0,1]:
///
///   q(x,y) = sigma^2 2^{1-nu}/Gamma(nu) (sqrt(2 nu) |x-y| / rho)^nu
///            K_nu(sqrt(2 nu) |x-y| / rho)
///
/// with K_nu the modified Bessel function of the second kind. The diagonal is
/// returned as sigma^2 exactly for |x-y| < 1e-14 (the analytic limit).
class MaternKernel {
public:
    explicit MaternKernel(MaternParams params);

    Real operator()(Real x, Real y) const;
    const MaternParams& params() const noexcept { return params_; }

private:
    MaternParams params_;
    Real prefactor_; // 2^{1-nu}/Gamma(nu), precomputed
};

/// Covariance commuting with the operator: Q = A^{-(nu+1/2)}, i.e. the
/// truncated series q(x,y) = sum_j lambda_j^{-(nu+1/2)} e_j(x) e_j(y) over the
/// operator's admissible modes. Eigenpairs of Q are (lambda_j^{-(nu+1/2)}, e_j).
class OperatorPowerKernel {
public:
    OperatorPowerKernel(std::shared_ptr<const SpectralOperator> op, Real smoothness);

    Real operator()(Real x, Real y) const;
    Real smoothness() const noexcept { return smoothness_; }
    const SpectralOperator& op() const noexcept { return *op_; }
    std::shared_ptr<const SpectralOperator> op_ptr() const noexcept { return op_; }

    /// mu_j = lambda_j^{-(nu+1/2)} in mode order (size mode_count).
    const Vector& mode_weights() const noexcept { return mode_weights_; }

private:
    std::shared_ptr<const SpectralOperator> op_;
    Real smoothness_;
    Vector mode_weights_;
};

/// Kernel given by values on a grid, evaluated off-grid by bilinear
/// interpolation. The value matrix must be symmetric (tolerance 1e-10) and the
/// grid strictly increasing inside [0,1].
class TabulatedKernel {
public:
    TabulatedKernel(Vector grid, Matrix values);

    /// CSV layout: header "x,<grid...>", then one row per grid point:
    /// "<x_i>,<q(x_i, x_0)>,...". Row coordinates must repeat the header grid.
    static TabulatedKernel from_csv(const std::string& path);

    Real operator()(Real x, Real y) const;
    const Vector& grid() const noexcept { return grid_; }
    const Matrix& values() const noexcept { return values_; }

private:
    Vector grid_;
    Matrix values_;
};

using Kernel = std::variant<MaternKernel, OperatorPowerKernel, TabulatedKernel>;

/// q(x, y). Throws std::domain_error on non-finite input.
Real kernel_value(const Kernel& kernel, Real x, Real y);

/// Discrete null coefficient matrix C on the scheme: Pointwise -> kernel at
/// vertices; LocalAverage -> kernel at cell centroids. IdentityGrid is
/// rejected (use an explicit fine Pointwise scheme).
Matrix coefficient_matrix(const Kernel& kernel, const ObservationScheme& scheme);

/// Leading eigenvalues of Q where analytically available
/// (OperatorPowerKernel: mu_j sorted nonincreasing). Matern/Tabulated have no
/// closed form and throw std::invalid_argument; use the discrete route in the
/// weighted chi-square module instead.
Vector reference_eigenvalues(const Kernel& kernel, Index count);

/// Short human-readable identity used in study reports, e.g.
/// "matern(1,0.375,0.5)" or "commuting(nu=0.5)".
std::string kernel_label(const Kernel& kernel);

/// Compact search box for kernel parameters.
struct ParameterBox {
    Vector lower;
    Vector upper;
    std::vector<std::string> names;

    ParameterBox(Vector lo, Vector up, std::vector<std::string> labels);
    Index dim() const noexcept { return lower.size(); }
};

} // namespace spdecov
