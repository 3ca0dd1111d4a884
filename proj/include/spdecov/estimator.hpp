#pragma once

#include <memory>

#include "spdecov/kernels.hpp"
#include "spdecov/observation.hpp"
#include "spdecov/spectral.hpp"
#include "spdecov/types.hpp"

namespace spdecov {

// Discretely observed path: one row per observation time, one column per
// spatial degree of freedom. When mode_coefficients is true the columns are
// spectral coefficients a_j and scheme is null; this is the route used by the
// semigroup-adjusted diagnostic.
struct PathObservations {
    Matrix values;
    Real delta = 0;
    Real horizon = 0;
    std::shared_ptr<const ObservationScheme> scheme;
    bool mode_coefficients = false;

    PathObservations(Matrix v, Real d, Real t,
                     std::shared_ptr<const ObservationScheme> s,
                     bool modes = false);

    Index increments() const { return values.rows() - 1; }
};

struct RealizedCovariation {
    Matrix c;           // sum of increment outer products divided by horizon
    Real delta = 0;
    Real horizon = 0;
    Real t_delta = 0;   // floor(horizon/delta) * delta
    std::shared_ptr<const ObservationScheme> scheme;
};

// C_{jk} = (1/T) sum_i (v[i,j]-v[i-1,j]) (v[i,k]-v[i-1,k]).
RealizedCovariation realized_covariation(const PathObservations& obs);

// Squared Hilbert-Schmidt distance of two kernels given by coefficient
// matrices on a common basis with Gram matrix G:
// tr(G (C1-C2)^T G (C1-C2)).
Real hs_distance_sq(const Matrix& c1, const Matrix& c2, const Matrix& gram);

// Semigroup-adjusted realized covariation over mode coefficients; replaces
// raw increments a_j(i delta) - a_j((i-1) delta) by
// a_j(i delta) - e^{-lambda_j delta} a_j((i-1) delta).
Matrix sarcv(const PathObservations& obs, const SpectralOperator& op);

// HS distance between the realized covariation, prolonged onto a fine
// Pointwise grid by the scheme's reconstruction, and the reference kernel
// sampled on that grid. Returns the (non-squared) distance.
Real estimation_error(const RealizedCovariation& rv, const Kernel& reference,
                      const ObservationScheme& fine);

// Prolongation matrix taking values on the scheme's degrees of freedom to
// values at the given points via the scheme's reconstruction (piecewise
// linear for Pointwise, piecewise constant for LocalAverage). Rows index the
// evaluation points.
Matrix prolongation_matrix(const ObservationScheme& coarse, const Vector& points);

} // namespace spdecov
