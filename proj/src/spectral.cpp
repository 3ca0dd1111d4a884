#include "spdecov/spectral.hpp"

#include <cmath>
#include <numbers>

namespace spdecov {

namespace {
constexpr Real kPi = std::numbers::pi_v<Real>;
constexpr Real kSqrt2 = std::numbers::sqrt2_v<Real>;
} // namespace

SpectralOperator::SpectralOperator(Boundary boundary, Real base_shift, Real diffusivity,
                                   Index mode_count)
    : boundary_(boundary), base_shift_(base_shift), diffusivity_(diffusivity),
      mode_count_(mode_count) {
    if (!(base_shift >= 0) || !std::isfinite(base_shift))
        throw std::invalid_argument("SpectralOperator: base_shift must be >= 0");
    if (!(diffusivity > 0) || !std::isfinite(diffusivity))
        throw std::invalid_argument("SpectralOperator: diffusivity must be > 0");
    if (mode_count < 1)
        throw std::invalid_argument("SpectralOperator: mode_count must be >= 1");
    if (boundary == Boundary::Neumann && !(base_shift > 0))
        throw std::invalid_argument(
            "SpectralOperator: Neumann constant mode needs base_shift > 0 for a positive spectrum");
}

void SpectralOperator::check_mode(Index j) const {
    if (j < first_mode() || j > last_mode())
        throw std::out_of_range("SpectralOperator: mode index outside admissible range");
}

Real SpectralOperator::eigenvalue(Index j) const {
    check_mode(j);
    const Real jpi = static_cast<Real>(j) * kPi;
    return base_shift_ + diffusivity_ * jpi * jpi;
}

Real SpectralOperator::eigenfunction_value(Index j, Real x) const {
    check_mode(j);
    if (!(x >= 0.0 && x <= 1.0))
        throw std::domain_error("SpectralOperator: point outside [0,1]");
    if (boundary_ == Boundary::Dirichlet)
        return kSqrt2 * std::sin(static_cast<Real>(j) * kPi * x);
    return j == 0 ? 1.0 : kSqrt2 * std::cos(static_cast<Real>(j) * kPi * x);
}

Real SpectralOperator::semigroup_factor(Index j, Real t) const {
    check_mode(j);
    if (!(t >= 0))
        throw std::domain_error("SpectralOperator: semigroup time must be >= 0");
    return std::exp(-eigenvalue(j) * t);
}

Vector SpectralOperator::eigenvalues() const {
    Vector out(mode_count_);
    for (Index m = 0; m < mode_count_; ++m)
        out[m] = eigenvalue(first_mode() + m);
    return out;
}

Matrix SpectralOperator::basis_matrix(const Vector& grid) const {
    Matrix out(mode_count_, grid.size());
    for (Index k = 0; k < grid.size(); ++k) {
        if (!(grid[k] >= 0.0 && grid[k] <= 1.0))
            throw std::domain_error("SpectralOperator: grid point outside [0,1]");
        for (Index m = 0; m < mode_count_; ++m)
            out(m, k) = eigenfunction_value(first_mode() + m, grid[k]);
    }
    return out;
}

Matrix SpectralOperator::basis_cell_averages(const Vector& breaks) const {
    if (breaks.size() < 2)
        throw std::invalid_argument("SpectralOperator: need at least one cell");
    const Index cells = breaks.size() - 1;
    Matrix out(mode_count_, cells);
    for (Index c = 0; c < cells; ++c) {
        const Real a = breaks[c], b = breaks[c + 1];
        if (!(a >= 0.0 && b <= 1.0 && b > a))
            throw std::domain_error("SpectralOperator: invalid cell for basis averages");
        const Real w = b - a;
        for (Index m = 0; m < mode_count_; ++m) {
            const Index j = first_mode() + m;
            const Real jpi = static_cast<Real>(j) * kPi;
            if (boundary_ == Boundary::Dirichlet) {
                out(m, c) = kSqrt2 * (std::cos(jpi * a) - std::cos(jpi * b)) / (jpi * w);
            } else {
                out(m, c) = j == 0 ? 1.0
                                   : kSqrt2 * (std::sin(jpi * b) - std::sin(jpi * a)) / (jpi * w);
            }
        }
    }
    return out;
}

} // namespace spdecov
