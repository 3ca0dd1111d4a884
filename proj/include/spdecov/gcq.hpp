#pragma once

#include <cstdint>

#include "spdecov/types.hpp"

namespace spdecov {

/// Law of V = sum_m w_m Z_m^2 with Z_m independent standard normals; the
/// limiting null distribution of the goodness-of-fit statistic, with weights
/// built from eigenvalue pairs of the null covariance.
class WeightedChiSquare {
public:
    /// Weights must be positive; they are sorted nonincreasing. source_count
    /// records how many covariance eigenvalues generated them.
    explicit WeightedChiSquare(Vector weights, Index source_count = 0);

    const Vector& weights() const noexcept { return weights_; }
    Index source_count() const noexcept { return source_count_; }
    Real mean() const noexcept { return weights_.sum(); }
    Real variance() const noexcept { return 2.0 * weights_.squaredNorm(); }

private:
    Vector weights_;
    Index source_count_;
};

/// Pair weights {2 mu_i mu_j : j <= i} of the limiting quadratic form, sorted
/// nonincreasing. mu must be nonnegative and nonincreasing.
Vector gamma_weights(const Vector& mu);

/// Eigenvalues of the null covariance in the observation basis: the spectrum
/// of L^T C0 L where G = L L^T (similar to G C0). Values below the floor are
/// dropped; the top-k survivors are returned nonincreasing. floor < 0 selects
/// the default 1e-12 times the largest eigenvalue.
Vector null_eigenvalues(const Matrix& gram, const Matrix& c0, Index k, Real floor = -1.0);

/// P(V > x) by numerical inversion of the characteristic function (Imhof):
/// p = 1/2 + (1/pi) Int_0^inf sin(theta(u)) / (u rho(u)) du.
Real tail_probability(const WeightedChiSquare& dist, Real x);

/// Smallest x with P(V <= x) >= level, from bisection on tail_probability to
/// |p - (1-level)| <= 1e-6.
Real quantile(const WeightedChiSquare& dist, Real level);

/// Empirical exceedance frequency over n draws; verification oracle.
Real mc_tail_oracle(const WeightedChiSquare& dist, Real x, Index n, std::uint64_t seed);

} // namespace spdecov
