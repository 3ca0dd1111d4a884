#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "spdecov/estimator.hpp"
#include "spdecov/gcq.hpp"
#include "spdecov/kernels.hpp"

namespace spdecov {

struct TestReport {
    Real statistic = 0;
    Real p_value = 1;
    Real alpha = 0;
    bool reject = false;
    Index weights_used = 0;
    std::string null_descriptor;
    Vector theta_star;  // empty for the fixed-null test
    std::vector<std::string> warnings;

    /// Single-line JSON record {statistic, p_value, alpha, reject,
    /// theta_star?, warnings[]}.
    std::string to_json() const;
};

struct TestOptions {
    /// Cap on null-covariance eigenvalues kept before forming pair weights;
    /// the effective count is min(dim, max_eigenvalues).
    Index max_eigenvalues = 100;
    /// Eigenvalue floor; negative selects 1e-12 times the largest eigenvalue.
    Real eigen_floor = -1.0;
};

/// Fixed-null test: statistic delta^{-1} || RV/t_delta - C0 ||^2 in the
/// scheme's Gram geometry, calibrated by the weighted chi-square law with
/// pair weights from the eigenvalues of the null covariance. Rejects when
/// p < alpha.
TestReport test_fixed(const PathObservations& obs, const Kernel& null_kernel, Real alpha,
                      const TestOptions& opts = {});

/// Parametric kernel family over a box of parameters.
class KernelFamily {
public:
    /// theta = (variance, smoothness, range).
    static KernelFamily matern();
    /// theta = (smoothness,) for Q = A^{-(smoothness+1/2)} w.r.t. a fixed operator.
    static KernelFamily operator_power(std::shared_ptr<const SpectralOperator> op);

    Kernel make(const Vector& theta) const;
    Index dim() const noexcept { return dim_; }
    const std::string& name() const noexcept { return name_; }

private:
    KernelFamily(std::string name, Index dim,
                 std::shared_ptr<const SpectralOperator> op);

    std::string name_;
    Index dim_;
    std::shared_ptr<const SpectralOperator> op_;
};

/// Parametric test: minimizes the fixed-test objective over the box
/// (Latin-hypercube scan, then Nelder-Mead refinement clamped to the box) and
/// calibrates the minimized statistic by the weighted chi-square law of the
/// fitted kernel. Conservative by construction. scan_seed fixes the
/// Latin-hypercube draw so identical inputs give identical reports.
TestReport test_parametric(const PathObservations& obs, const KernelFamily& family,
                           const ParameterBox& box, Real alpha,
                           const TestOptions& opts = {},
                           std::uint64_t scan_seed = 0x5eedull);

} // namespace spdecov
