#include "spdecov/gcq.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace spdecov {

WeightedChiSquare::WeightedChiSquare(Vector weights, Index source_count)
    : weights_(std::move(weights)), source_count_(source_count) {
    if ((weights_.array() <= 0).any())
        throw std::invalid_argument("WeightedChiSquare: weights must be positive");
    std::sort(weights_.begin(), weights_.end(), std::greater<Real>());
}

Vector gamma_weights(const Vector& mu) {
    if ((mu.array() < 0).any())
        throw std::domain_error("gamma_weights: negative eigenvalue");
    for (Index i = 0; i + 1 < mu.size(); ++i)
        if (mu[i] < mu[i + 1])
            throw std::invalid_argument("gamma_weights: eigenvalues must be nonincreasing");
    const Index k = mu.size();
    Vector w(k * (k + 1) / 2);
    Index m = 0;
    for (Index i = 0; i < k; ++i)
        for (Index j = 0; j <= i; ++j)
            w[m++] = 2.0 * mu[i] * mu[j];
    std::sort(w.begin(), w.end(), std::greater<Real>());
    return w;
}

Vector null_eigenvalues(const Matrix& gram, const Matrix& c0, Index k, Real floor) {
    if (gram.rows() != gram.cols() || c0.rows() != c0.cols() || gram.rows() != c0.rows())
        throw std::invalid_argument("null_eigenvalues: dimension mismatch");
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success)
        throw NumericalError("null_eigenvalues: Gram matrix is not positive definite");
    const Matrix l = llt.matrixL();
    // L^T C0 L is symmetric and similar to G C0, so it carries the spectrum of
    // the null covariance in the observation basis.
    const Matrix m = l.transpose() * c0 * l;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
    if (eig.info() != Eigen::Success)
        throw NumericalError("null_eigenvalues: eigenvalue decomposition failed");
    Vector values = eig.eigenvalues().reverse();
    if (values.size() == 0)
        return values;
    if (floor < 0)
        floor = 1e-12 * values[0];
    std::vector<Real> kept;
    for (Index i = 0; i < values.size(); ++i)
        if (values[i] > floor)
            kept.push_back(values[i]);
    const Index n = std::min<Index>(k, static_cast<Index>(kept.size()));
    Vector out(n);
    for (Index i = 0; i < n; ++i)
        out[i] = kept[static_cast<std::size_t>(i)];
    return out;
}

namespace {

// Gauss-Kronrod 15(7) nodes and weights on [-1,1].
constexpr int kGkPoints = 15;
constexpr Real kGkNodes[kGkPoints] = {
    -0.991455371120813, -0.949107912342759, -0.864864423359769, -0.741531185599394,
    -0.586087235467691, -0.405845151377397, -0.207784955007898, 0.0,
    0.207784955007898,  0.405845151377397,  0.586087235467691,  0.741531185599394,
    0.864864423359769,  0.949107912342759,  0.991455371120813};
constexpr Real kGkKronrod[kGkPoints] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728,
    0.204432940075298, 0.190350578064785, 0.169004726639267, 0.140653259715525,
    0.104790010322250, 0.063092092629979, 0.022935322010529};
constexpr Real kGkGauss[7] = {0.129484966168870, 0.279705391489277, 0.381830050505119,
                              0.417959183673469, 0.381830050505119, 0.279705391489277,
                              0.129484966168870};

// Imhof integrand sin(theta(u)) / (u rho(u)) with the u->0 limit spliced in.
class ImhofIntegrand {
public:
    ImhofIntegrand(const Vector& w, Real x) : w_(w), x_(x), limit_(0.5 * (w.sum() - x)) {}

    Real operator()(Real u) const {
        if (u <= 0)
            return limit_;
        Real theta = -0.5 * x_ * u;
        Real log_rho = 0;
        for (Index m = 0; m < w_.size(); ++m) {
            const Real wu = w_[m] * u;
            theta += 0.5 * std::atan(wu);
            log_rho += 0.25 * std::log1p(wu * wu);
        }
        return std::sin(theta) * std::exp(-log_rho) / u;
    }

    Real log_envelope(Real u) const {
        Real log_rho = 0;
        for (Index m = 0; m < w_.size(); ++m) {
            const Real wu = w_[m] * u;
            log_rho += 0.25 * std::log1p(wu * wu);
        }
        return log_rho + std::log(u);
    }

private:
    const Vector& w_;
    Real x_;
    Real limit_;
};

struct PanelResult {
    Real value;
    Real error;
};

PanelResult gauss_kronrod(const ImhofIntegrand& f, Real a, Real b) {
    const Real center = 0.5 * (a + b);
    const Real halfwidth = 0.5 * (b - a);
    Real fv[kGkPoints];
    for (int i = 0; i < kGkPoints; ++i)
        fv[i] = f(center + halfwidth * kGkNodes[i]);
    Real kron = 0, gauss = 0;
    for (int i = 0; i < kGkPoints; ++i)
        kron += kGkKronrod[i] * fv[i];
    for (int i = 0; i < 7; ++i)
        gauss += kGkGauss[i] * fv[2 * i + 1];
    kron *= halfwidth;
    gauss *= halfwidth;
    return {kron, std::abs(kron - gauss)};
}

Real adaptive(const ImhofIntegrand& f, Real a, Real b, Real tol, int depth = 0) {
    const auto [value, error] = gauss_kronrod(f, a, b);
    if (error < tol || depth > 24)
        return value;
    const Real mid = 0.5 * (a + b);
    return adaptive(f, a, mid, 0.5 * tol, depth + 1)
           + adaptive(f, mid, b, 0.5 * tol, depth + 1);
}

// Iterated averaging of the partial sums of an alternating-ish tail series
// (Euler transform flavor); stabilizes the oscillatory panel contributions.
Real accelerate(const std::vector<Real>& terms) {
    std::vector<Real> level(terms.size());
    std::partial_sum(terms.begin(), terms.end(), level.begin());
    const std::size_t rounds = std::min<std::size_t>(12, level.size() - 1);
    for (std::size_t r = 0; r < rounds; ++r) {
        for (std::size_t i = 0; i + 1 < level.size() - r; ++i)
            level[i] = 0.5 * (level[i] + level[i + 1]);
    }
    return level[terms.size() - 1 - rounds];
}

} // namespace

Real tail_probability(const WeightedChiSquare& dist, Real x) {
    if (!std::isfinite(x))
        throw std::domain_error("tail_probability: non-finite threshold");
    const Vector& w = dist.weights();
    if (w.size() == 0)
        throw NumericalError("tail_probability: degenerate distribution (no weights)");
    if (x <= 0)
        return 1.0;

    const ImhofIntegrand f(w, x);

    // Stage 1: integrate up to the point where theta'(u) is dominated by the
    // -x/2 drift, i.e. sum w/(1+(wu)^2) has decayed well below x.
    auto drift = [&](Real u) {
        Real s = 0;
        for (Index m = 0; m < w.size(); ++m)
            s += w[m] / (1.0 + (w[m] * u) * (w[m] * u));
        return s;
    };
    Real u1 = 1.0 / w[0];
    while (drift(u1) > 0.02 * x && u1 < 1e30)
        u1 *= 2;

    // Cover [0, u1] by geometrically growing panels capped at two oscillation
    // periods. A single quadrature call over the whole range can place every
    // node past the integrand's support when the weights span many orders of
    // magnitude, silently returning zero; short panels cannot.
    const Real max_panel = 8.0 * std::numbers::pi_v<Real> / x;
    Real total = 0;
    Real lo = 0;
    Real width = std::min(u1, 1.0 / w[0]);
    while (lo < u1) {
        const Real hi = std::min(u1, lo + std::min(width, max_panel));
        total += adaptive(f, lo, hi, 1e-10);
        lo = hi;
        width *= 2;
    }

    // Stage 2: beyond u1 the integrand oscillates with near-constant period
    // 2 pi / (x/2) in sign changes; sum half-period panels with averaging
    // acceleration until the envelope 1/(u rho(u)) is negligible.
    const Real panel = 2.0 * std::numbers::pi_v<Real> / x;
    const int panel_cap = 4000;
    std::vector<Real> terms;
    Real a = u1;
    Real prev_estimate = 0;
    bool have_prev = false;
    for (int n = 0; n < panel_cap; ++n) {
        terms.push_back(adaptive(f, a, a + panel, 1e-12));
        a += panel;
        if (f.log_envelope(a) > std::log(1e12)) {
            for (const Real t : terms)
                total += t;
            return std::clamp(0.5 + total / std::numbers::pi_v<Real>, 0.0, 1.0);
        }
        if (terms.size() >= 8) {
            const Real estimate = accelerate(terms);
            if (have_prev && std::abs(estimate - prev_estimate) < 1e-12) {
                total += estimate;
                return std::clamp(0.5 + total / std::numbers::pi_v<Real>, 0.0, 1.0);
            }
            prev_estimate = estimate;
            have_prev = true;
        }
    }
    total += accelerate(terms);
    return std::clamp(0.5 + total / std::numbers::pi_v<Real>, 0.0, 1.0);
}

Real quantile(const WeightedChiSquare& dist, Real level) {
    if (!(level > 0) || !(level < 1))
        throw std::invalid_argument("quantile: level must lie in (0,1)");
    const Real alpha = 1.0 - level;
    Real lo = 0.0;
    Real hi = dist.mean() + 20.0 * std::sqrt(dist.variance());
    if (tail_probability(dist, hi) > alpha)
        hi *= 10.0;  // widen once, then give up
    if (tail_probability(dist, hi) > alpha)
        throw NumericalError("quantile: bracket does not contain the requested level");
    for (int iter = 0; iter < 500; ++iter) {
        const Real mid = 0.5 * (lo + hi);
        const Real p = tail_probability(dist, mid);
        if (std::abs(p - alpha) <= 1e-6)
            return mid;
        if (p > alpha)
            lo = mid;
        else
            hi = mid;
    }
    throw NumericalError("quantile: bisection failed to reach tolerance");
}

Real mc_tail_oracle(const WeightedChiSquare& dist, Real x, Index n, std::uint64_t seed) {
    if (n < 1)
        throw std::invalid_argument("mc_tail_oracle: need at least one draw");
    std::mt19937_64 rng(seed);
    std::normal_distribution<Real> normal(0.0, 1.0);
    const Vector& w = dist.weights();
    Index hits = 0;
    for (Index d = 0; d < n; ++d) {
        Real v = 0;
        for (Index m = 0; m < w.size(); ++m) {
            const Real z = normal(rng);
            v += w[m] * z * z;
        }
        if (v > x)
            ++hits;
    }
    return static_cast<Real>(hits) / static_cast<Real>(n);
}

} // namespace spdecov
