#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace spdecov {

using Real = double;
using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Invalid run configuration (bad resolutions, incompatible grids, malformed input files).
/// The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numerical failure inside an algorithm (factorization breakdown, bracket failure,
/// indefinite embedding beyond the clipping policy). The CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace spdecov
