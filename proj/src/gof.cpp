#include "spdecov/gof.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

namespace spdecov {

std::string TestReport::to_json() const {
    nlohmann::json j;
    j["statistic"] = statistic;
    j["p_value"] = p_value;
    j["alpha"] = alpha;
    j["reject"] = reject;
    if (theta_star.size() > 0)
        j["theta_star"] = std::vector<Real>(theta_star.begin(), theta_star.end());
    j["warnings"] = warnings;
    return j.dump();
}

namespace {

// Shared core: statistic against a fixed coefficient matrix plus the weighted
// chi-square calibration from that matrix's spectrum.
struct Calibration {
    Real statistic;
    Real p_value;
    Index weights_used;
};

Matrix rescaled_estimate(const PathObservations& obs, RealizedCovariation& rv) {
    rv = realized_covariation(obs);
    // The estimator divides by the horizon T; the test statistic normalizes
    // by t_delta = floor(T/delta) delta instead.
    return rv.c * (rv.horizon / rv.t_delta);
}

Calibration calibrate(const Matrix& estimate, const Matrix& c0, const Matrix& gram,
                      Real delta, const TestOptions& opts) {
    const Real statistic = hs_distance_sq(estimate, c0, gram) / delta;
    const Index k = std::min<Index>(c0.rows(), opts.max_eigenvalues);
    const Vector mu = null_eigenvalues(gram, c0, k, opts.eigen_floor);
    const WeightedChiSquare dist(gamma_weights(mu), mu.size());
    const Real p = tail_probability(dist, statistic);
    return {statistic, p, dist.weights().size()};
}

} // namespace

TestReport test_fixed(const PathObservations& obs, const Kernel& null_kernel, Real alpha,
                      const TestOptions& opts) {
    if (!(alpha > 0) || !(alpha < 1))
        throw std::invalid_argument("test_fixed: alpha must lie in (0,1)");
    if (obs.increments() < 2)
        throw std::invalid_argument("test_fixed: need at least two increments");
    if (!obs.scheme)
        throw std::invalid_argument("test_fixed: observations carry no scheme");

    RealizedCovariation rv;
    const Matrix estimate = rescaled_estimate(obs, rv);
    const Matrix c0 = coefficient_matrix(null_kernel, *obs.scheme);
    if (c0.rows() != estimate.rows())
        throw std::invalid_argument("test_fixed: scheme dimension mismatch");
    const auto cal = calibrate(estimate, c0, gram_matrix(*obs.scheme), obs.delta, opts);

    TestReport report;
    report.statistic = cal.statistic;
    report.p_value = cal.p_value;
    report.alpha = alpha;
    report.reject = cal.p_value < alpha;
    report.weights_used = cal.weights_used;
    report.null_descriptor = kernel_label(null_kernel);
    return report;
}

KernelFamily::KernelFamily(std::string name, Index dim,
                           std::shared_ptr<const SpectralOperator> op)
    : name_(std::move(name)), dim_(dim), op_(std::move(op)) {}

KernelFamily KernelFamily::matern() { return KernelFamily("matern", 3, nullptr); }

KernelFamily KernelFamily::operator_power(std::shared_ptr<const SpectralOperator> op) {
    if (!op)
        throw std::invalid_argument("KernelFamily: null operator");
    return KernelFamily("commuting", 1, std::move(op));
}

Kernel KernelFamily::make(const Vector& theta) const {
    if (theta.size() != dim_)
        throw std::invalid_argument("KernelFamily: parameter dimension mismatch");
    if (op_)
        return OperatorPowerKernel(op_, theta[0]);
    return MaternKernel({theta[0], theta[1], theta[2]});
}

namespace {

class BoxObjective {
public:
    BoxObjective(const KernelFamily& family, const ParameterBox& box,
                 const Matrix& estimate, const ObservationScheme& scheme, Real delta)
        : family_(family), box_(box), estimate_(estimate), scheme_(scheme),
          delta_(delta) {}

    Real operator()(const Vector& theta) {
        ++evaluations_;
        const Matrix c = coefficient_matrix(family_.make(clamp(theta)), scheme_);
        return hs_distance_sq(estimate_, c, scheme_.gram()) / delta_;
    }

    Vector clamp(const Vector& theta) const {
        return theta.cwiseMax(box_.lower).cwiseMin(box_.upper);
    }

    Index evaluations() const noexcept { return evaluations_; }

private:
    const KernelFamily& family_;
    const ParameterBox& box_;
    const Matrix& estimate_;
    const ObservationScheme& scheme_;
    Real delta_;
    Index evaluations_ = 0;
};

struct SimplexVertex {
    Vector point;
    Real value;
};

// Latin-hypercube scan of the box: one stratum per point and dimension, with
// uniformly drawn offsets and independently shuffled stratum orders.
std::vector<Vector> latin_hypercube(const ParameterBox& box, Index points,
                                    std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<Real> unif(0.0, 1.0);
    const Index d = box.dim();
    std::vector<std::vector<Index>> strata(static_cast<std::size_t>(d));
    for (Index k = 0; k < d; ++k) {
        auto& order = strata[static_cast<std::size_t>(k)];
        order.resize(static_cast<std::size_t>(points));
        std::iota(order.begin(), order.end(), Index{0});
        std::shuffle(order.begin(), order.end(), rng);
    }
    std::vector<Vector> out(static_cast<std::size_t>(points), Vector(d));
    for (Index i = 0; i < points; ++i)
        for (Index k = 0; k < d; ++k) {
            const Real stratum = static_cast<Real>(strata[static_cast<std::size_t>(k)]
                                                         [static_cast<std::size_t>(i)]);
            const Real u = (stratum + unif(rng)) / static_cast<Real>(points);
            out[static_cast<std::size_t>(i)][k] = box.lower[k] + u * (box.upper[k] - box.lower[k]);
        }
    return out;
}

// Nelder-Mead with standard coefficients (reflection 1, expansion 2,
// contraction 0.5, shrink 0.5); iterates clamped to the box inside the
// objective. Returns false when the evaluation budget runs out before the
// simplex collapses.
bool nelder_mead(BoxObjective& objective, const ParameterBox& box, Vector start,
                 Index budget, Vector& best_point, Real& best_value) {
    const Index d = box.dim();
    std::vector<SimplexVertex> simplex;
    simplex.reserve(static_cast<std::size_t>(d) + 1);
    simplex.push_back({start, objective(start)});
    for (Index k = 0; k < d; ++k) {
        Vector v = start;
        const Real span = box.upper[k] - box.lower[k];
        v[k] += (v[k] + 0.05 * span <= box.upper[k]) ? 0.05 * span : -0.05 * span;
        simplex.push_back({v, objective(v)});
    }
    const Index start_evals = objective.evaluations();

    auto by_value = [](const SimplexVertex& a, const SimplexVertex& b) {
        return a.value < b.value;
    };
    bool converged = false;
    while (objective.evaluations() - start_evals < budget) {
        std::sort(simplex.begin(), simplex.end(), by_value);
        Real diameter = 0;
        for (const auto& v : simplex)
            for (Index k = 0; k < d; ++k)
                diameter = std::max(diameter, std::abs(v.point[k] - simplex[0].point[k])
                                                  / (box.upper[k] - box.lower[k]));
        if (diameter < 1e-6) {
            converged = true;
            break;
        }

        Vector centroid = Vector::Zero(d);
        for (std::size_t i = 0; i + 1 < simplex.size(); ++i)
            centroid += simplex[i].point;
        centroid /= static_cast<Real>(d);
        SimplexVertex& worst = simplex.back();

        const Vector reflected = centroid + (centroid - worst.point);
        const Real fr = objective(reflected);
        if (fr < simplex[0].value) {
            const Vector expanded = centroid + 2.0 * (centroid - worst.point);
            const Real fe = objective(expanded);
            worst = fe < fr ? SimplexVertex{expanded, fe} : SimplexVertex{reflected, fr};
        } else if (fr < simplex[simplex.size() - 2].value) {
            worst = {reflected, fr};
        } else {
            const Vector contracted = centroid + 0.5 * (worst.point - centroid);
            const Real fc = objective(contracted);
            if (fc < worst.value) {
                worst = {contracted, fc};
            } else {
                for (std::size_t i = 1; i < simplex.size(); ++i) {
                    simplex[i].point = simplex[0].point
                                       + 0.5 * (simplex[i].point - simplex[0].point);
                    simplex[i].value = objective(simplex[i].point);
                }
            }
        }
    }
    std::sort(simplex.begin(), simplex.end(), by_value);
    best_point = simplex[0].point;
    best_value = simplex[0].value;
    return converged;
}

} // namespace

TestReport test_parametric(const PathObservations& obs, const KernelFamily& family,
                           const ParameterBox& box, Real alpha, const TestOptions& opts,
                           std::uint64_t scan_seed) {
    if (!(alpha > 0) || !(alpha < 1))
        throw std::invalid_argument("test_parametric: alpha must lie in (0,1)");
    if (box.dim() != family.dim())
        throw std::invalid_argument("test_parametric: box dimension does not match family");
    if (!obs.scheme)
        throw std::invalid_argument("test_parametric: observations carry no scheme");

    RealizedCovariation rv;
    const Matrix estimate = rescaled_estimate(obs, rv);
    BoxObjective objective(family, box, estimate, *obs.scheme, obs.delta);

    Vector best_point;
    Real best_value = std::numeric_limits<Real>::infinity();
    for (const Vector& theta : latin_hypercube(box, 64, scan_seed)) {
        const Real value = objective(theta);
        if (value < best_value) {
            best_value = value;
            best_point = theta;
        }
    }
    Vector refined;
    Real refined_value;
    const bool converged = nelder_mead(objective, box, best_point, 400, refined,
                                       refined_value);
    if (refined_value < best_value) {
        best_value = refined_value;
        best_point = refined;
    }
    const Vector theta_star = objective.clamp(best_point);

    const Kernel fitted = family.make(theta_star);
    const Matrix c_star = coefficient_matrix(fitted, *obs.scheme);
    const auto cal = calibrate(estimate, c_star, gram_matrix(*obs.scheme), obs.delta, opts);

    TestReport report;
    report.statistic = cal.statistic;
    report.p_value = cal.p_value;
    report.alpha = alpha;
    report.reject = cal.p_value < alpha;
    report.weights_used = cal.weights_used;
    report.null_descriptor = kernel_label(fitted);
    report.theta_star = theta_star;
    if (!converged)
        report.warnings.push_back("optimizer did not converge within budget");
    return report;
}

} // namespace spdecov
