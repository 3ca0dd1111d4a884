#include "spdecov/estimator.hpp"

#include <cmath>
#include <stdexcept>

namespace spdecov {

PathObservations::PathObservations(Matrix v, Real d, Real t,
                                   std::shared_ptr<const ObservationScheme> s,
                                   bool modes)
    : values(std::move(v)), delta(d), horizon(t), scheme(std::move(s)),
      mode_coefficients(modes) {
    if (!(delta > 0) || !(horizon > 0))
        throw std::invalid_argument("PathObservations: delta and horizon must be > 0");
    if (!values.allFinite())
        throw std::invalid_argument("PathObservations: non-finite entries");
    const Index expected = static_cast<Index>(std::floor(horizon / delta + 1e-9)) + 1;
    if (values.rows() != expected)
        throw std::invalid_argument("PathObservations: row count does not match horizon/delta");
    if (!mode_coefficients) {
        if (!scheme)
            throw std::invalid_argument("PathObservations: missing observation scheme");
        if (values.cols() != scheme->dim())
            throw std::invalid_argument("PathObservations: column count does not match scheme");
    }
}

RealizedCovariation realized_covariation(const PathObservations& obs) {
    if (obs.values.rows() < 2)
        throw std::invalid_argument("realized_covariation: need at least one increment");
    const Index n = obs.values.rows() - 1;
    const Index d = obs.values.cols();
    Matrix c = Matrix::Zero(d, d);
    Vector inc(d);
    for (Index i = 1; i <= n; ++i) {
        inc = (obs.values.row(i) - obs.values.row(i - 1)).transpose();
        c.selfadjointView<Eigen::Lower>().rankUpdate(inc);
    }
    c = c.selfadjointView<Eigen::Lower>();
    c /= obs.horizon;
    return RealizedCovariation{std::move(c), obs.delta, obs.horizon,
                               static_cast<Real>(n) * obs.delta, obs.scheme};
}

Real hs_distance_sq(const Matrix& c1, const Matrix& c2, const Matrix& gram) {
    if (c1.rows() != c1.cols() || c2.rows() != c2.cols() || gram.rows() != gram.cols())
        throw std::invalid_argument("hs_distance_sq: matrices must be square");
    if (c1.rows() != c2.rows() || c1.rows() != gram.rows())
        throw std::invalid_argument("hs_distance_sq: dimension mismatch");
    // tr(G D^T G D) = <D G, G D>_F; valid for asymmetric differences too,
    // unlike the tr((G D)^2) shortcut.
    const Matrix d = c1 - c2;
    return (d * gram).cwiseProduct(gram * d).sum();
}

Matrix sarcv(const PathObservations& obs, const SpectralOperator& op) {
    if (!obs.mode_coefficients)
        throw std::invalid_argument("sarcv: observations must be spectral mode coefficients");
    if (obs.values.cols() != op.mode_count())
        throw std::invalid_argument("sarcv: mode count mismatch");
    if (obs.values.rows() < 2)
        throw std::invalid_argument("sarcv: need at least one increment");
    const Index n = obs.values.rows() - 1;
    const Index d = obs.values.cols();
    Vector decay(d);
    const Index j0 = op.first_mode();
    for (Index m = 0; m < d; ++m)
        decay[m] = op.semigroup_factor(j0 + m, obs.delta);
    Matrix c = Matrix::Zero(d, d);
    for (Index i = 1; i <= n; ++i) {
        const Vector inc = obs.values.row(i).transpose()
                           - decay.cwiseProduct(obs.values.row(i - 1).transpose());
        c.selfadjointView<Eigen::Lower>().rankUpdate(inc);
    }
    c = c.selfadjointView<Eigen::Lower>();
    c /= obs.horizon;
    return c;
}

Matrix prolongation_matrix(const ObservationScheme& coarse, const Vector& points) {
    const Vector& breaks = coarse.cells().breaks();
    Matrix p = Matrix::Zero(points.size(), coarse.dim());
    for (Index i = 0; i < points.size(); ++i) {
        const Real x = points[i];
        if (x < 0.0 || x > 1.0)
            throw std::domain_error("prolongation_matrix: point outside [0,1]");
        Index cell = 0;
        while (cell + 2 < breaks.size() && x >= breaks[cell + 1])
            ++cell;
        if (coarse.kind() == SchemeKind::LocalAverage) {
            p(i, cell) = 1.0;
        } else {
            const Real t = (x - breaks[cell]) / (breaks[cell + 1] - breaks[cell]);
            p(i, cell) = 1.0 - t;
            p(i, cell + 1) = t;
        }
    }
    return p;
}

Real estimation_error(const RealizedCovariation& rv, const Kernel& reference,
                      const ObservationScheme& fine) {
    if (!rv.scheme)
        throw ConfigError("estimation_error: realized covariation carries no scheme");
    if (fine.kind() == SchemeKind::LocalAverage)
        throw ConfigError("estimation_error: fine scheme must be vertex-based");
    const Vector pts = fine.coordinates();
    const Matrix p = prolongation_matrix(*rv.scheme, pts);
    const Matrix c_fine = p * rv.c * p.transpose();
    const Matrix c_ref = coefficient_matrix(reference, fine);
    // The squared distance can round to a tiny negative when the prolonged
    // estimate reproduces the reference exactly.
    return std::sqrt(std::max<Real>(0, hs_distance_sq(c_fine, c_ref, gram_matrix(fine))));
}

} // namespace spdecov
