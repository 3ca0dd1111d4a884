#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "spdecov/gcq.hpp"
#include "spdecov/kernels.hpp"
#include "spdecov/observation.hpp"

using namespace spdecov;

namespace {

// P(chi^2_1 > x) in closed form.
Real chi1_tail(Real x) { return std::erfc(std::sqrt(x / 2.0)); }

Vector make_weights(std::initializer_list<Real> w) {
    Vector v(static_cast<Index>(w.size()));
    Index i = 0;
    for (Real x : w)
        v[i++] = x;
    return v;
}

} // namespace

TEST_CASE("weighted chi-square bookkeeping") {
    const WeightedChiSquare dist(make_weights({2.0, 8.0, 4.0}), 2);
    CHECK(dist.weights()[0] == 8.0);
    CHECK(dist.weights()[2] == 2.0);
    CHECK(dist.source_count() == 2);
    CHECK(dist.mean() == doctest::Approx(14.0).epsilon(1e-15));
    CHECK(dist.variance() == doctest::Approx(2.0 * (64.0 + 16.0 + 4.0)).epsilon(1e-15));
    CHECK_THROWS_AS(WeightedChiSquare(make_weights({1.0, 0.0})), std::invalid_argument);
    CHECK_THROWS_AS(WeightedChiSquare(make_weights({1.0, -2.0})), std::invalid_argument);
}

TEST_CASE("pair weights of the limiting quadratic form") {
    SUBCASE("two eigenvalues") {
        const Vector w = gamma_weights(make_weights({2.0, 1.0}));
        REQUIRE(w.size() == 3);
        CHECK(w[0] == 8.0);
        CHECK(w[1] == 4.0);
        CHECK(w[2] == 2.0);
    }

    SUBCASE("single eigenvalue and empty input") {
        const Vector w = gamma_weights(make_weights({1.0}));
        REQUIRE(w.size() == 1);
        CHECK(w[0] == 2.0);
        CHECK(gamma_weights(Vector()).size() == 0);
    }

    SUBCASE("pair count is k (k + 1) / 2") {
        Vector mu(5);
        mu << 5.0, 4.0, 3.0, 2.0, 1.0;
        CHECK(gamma_weights(mu).size() == 15);
    }

    CHECK_THROWS_AS(gamma_weights(make_weights({2.0, -1.0})), std::domain_error);
    CHECK_THROWS_AS(gamma_weights(make_weights({1.0, 2.0})), std::invalid_argument);
}

TEST_CASE("null covariance eigenvalues in the observation basis") {
    SUBCASE("C0 equal to the Gram inverse has unit spectrum") {
        const auto scheme = ObservationScheme::pointwise(Subdivision::uniform(4));
        const Matrix& g = gram_matrix(scheme);
        const Matrix c0 = g.inverse();
        const Vector mu = null_eigenvalues(g, c0, 5);
        REQUIRE(mu.size() == 5);
        for (Index i = 0; i < 5; ++i)
            CHECK(mu[i] == doctest::Approx(1.0).epsilon(1e-10));
    }

    SUBCASE("identity Gram just orders the diagonal") {
        Matrix c0 = Matrix::Zero(2, 2);
        c0(0, 0) = 3.0;
        c0(1, 1) = 1.0;
        const Vector mu = null_eigenvalues(Matrix::Identity(2, 2), c0, 2);
        REQUIRE(mu.size() == 2);
        CHECK(mu[0] == doctest::Approx(3.0).epsilon(1e-13));
        CHECK(mu[1] == doctest::Approx(1.0).epsilon(1e-13));
    }

    SUBCASE("discrete spectrum of the commuting kernel matches the analytic one") {
        const auto op = std::make_shared<const SpectralOperator>(Boundary::Dirichlet, 0.0,
                                                                 1.0, 512);
        const Kernel q = OperatorPowerKernel(op, 0.5);
        const auto scheme = ObservationScheme::local_average(Subdivision::uniform(64));
        const Matrix c0 = coefficient_matrix(q, scheme);
        const Vector mu = null_eigenvalues(gram_matrix(scheme), c0, 3);
        const Vector ref = reference_eigenvalues(q, 3);
        REQUIRE(mu.size() == 3);
        for (Index i = 0; i < 3; ++i)
            CHECK(mu[i] == doctest::Approx(ref[i]).epsilon(0.02));
    }

    SUBCASE("floor drops trailing eigenvalues, k caps the count") {
        Matrix c0 = Matrix::Zero(3, 3);
        c0.diagonal() << 4.0, 1.0, 1e-15;
        const Matrix g = Matrix::Identity(3, 3);
        CHECK(null_eigenvalues(g, c0, 3).size() == 2);        // default floor 1e-12 * 4
        CHECK(null_eigenvalues(g, c0, 3, 0.5).size() == 2);   // explicit floor
        CHECK(null_eigenvalues(g, c0, 3, 2.0).size() == 1);
        const Vector top = null_eigenvalues(g, c0, 1);
        REQUIRE(top.size() == 1);
        CHECK(top[0] == doctest::Approx(4.0).epsilon(1e-13));
    }

    CHECK_THROWS_AS(null_eigenvalues(Matrix::Identity(2, 2), Matrix::Zero(3, 3), 2),
                    std::invalid_argument);
    CHECK_THROWS_AS(null_eigenvalues(-Matrix::Identity(2, 2), Matrix::Zero(2, 2), 2),
                    NumericalError);
}

TEST_CASE("tail probability against closed forms") {
    SUBCASE("single weight reduces to a scaled chi-square") {
        const WeightedChiSquare dist(make_weights({2.0}));
        CHECK(std::abs(tail_probability(dist, 2.0 * 3.841459) - 0.05) <= 1e-4);
        const WeightedChiSquare unit(make_weights({1.0}));
        for (Real x : {0.5, 1.0, 2.0, 5.0, 10.0})
            CHECK(tail_probability(unit, x) == doctest::Approx(chi1_tail(x)).epsilon(1e-6));
    }

    SUBCASE("boundary thresholds") {
        const WeightedChiSquare dist(make_weights({8.0, 4.0, 2.0}));
        CHECK(std::abs(tail_probability(dist, 0.0) - 1.0) <= 1e-6);
        CHECK(tail_probability(dist, -1.0) == 1.0);
        CHECK(tail_probability(dist, 1e9) <= 1e-9);
        CHECK_THROWS_AS(tail_probability(dist, std::numeric_limits<Real>::quiet_NaN()),
                        std::domain_error);
    }

    SUBCASE("three-weight value pinned against a large Monte-Carlo run") {
        const WeightedChiSquare dist(make_weights({8.0, 4.0, 2.0}));
        const Real p = tail_probability(dist, 14.0);
        CHECK(p == doctest::Approx(0.3683017885).epsilon(1e-6));
        CHECK(std::abs(p - mc_tail_oracle(dist, 14.0, 1000000, 8861)) <= 3e-3);
    }

    SUBCASE("nonincreasing in the threshold, always a probability") {
        const WeightedChiSquare dist(make_weights({5.0, 1.0, 0.25}));
        Real prev = 1.0;
        for (Real x = 0.0; x <= 40.0; x += 0.5) {
            const Real p = tail_probability(dist, x);
            CHECK(p >= 0.0);
            CHECK(p <= prev + 1e-9);
            prev = p;
        }
    }

    SUBCASE("positive homogeneity") {
        const WeightedChiSquare base(make_weights({3.0, 1.0}));
        const WeightedChiSquare scaled(make_weights({12.0, 4.0}));
        for (Real x : {1.0, 4.0, 9.0})
            CHECK(tail_probability(scaled, 4.0 * x) ==
                  doctest::Approx(tail_probability(base, x)).epsilon(1e-12));
    }

    SUBCASE("weights spanning many orders of magnitude still integrate correctly") {
        // pair weights of mu_j = j^{-2} span a 4e4 ratio; a quadrature that
        // misses the integrand support would return 1/2 everywhere here
        Vector mu(15);
        for (Index j = 0; j < 15; ++j)
            mu[j] = 1.0 / static_cast<Real>((j + 1) * (j + 1));
        const WeightedChiSquare dist(gamma_weights(mu), 15);
        const Real m = dist.mean();
        for (Real x : {0.5 * m, m, 2.0 * m}) {
            const Real p = tail_probability(dist, x);
            CHECK(std::abs(p - mc_tail_oracle(dist, x, 1000000, 4271)) <= 3e-3);
        }
    }

    SUBCASE("weights far below the largest do not move the result") {
        const Vector base = make_weights({8.0, 4.0, 2.0});
        Vector padded(8);
        padded << 8.0, 4.0, 2.0, 8e-13, 8e-13, 8e-13, 8e-13, 8e-13;
        const Real p1 = tail_probability(WeightedChiSquare(base), 14.0);
        const Real p2 = tail_probability(WeightedChiSquare(padded), 14.0);
        CHECK(std::abs(p1 - p2) <= 1e-6);
    }

    SUBCASE("degenerate distribution") {
        const WeightedChiSquare empty{Vector()};
        CHECK_THROWS_AS(tail_probability(empty, 1.0), NumericalError);
    }
}

TEST_CASE("quantiles by bisection") {
    const WeightedChiSquare unit(make_weights({1.0}));
    CHECK(std::abs(quantile(unit, 0.95) - 3.841459) <= 1e-3);

    SUBCASE("monotone in the level") {
        const WeightedChiSquare dist(make_weights({8.0, 4.0, 2.0}));
        Real prev = 0.0;
        for (Real level : {0.5, 0.8, 0.9, 0.95, 0.99}) {
            const Real q = quantile(dist, level);
            CHECK(q > prev);
            prev = q;
        }
    }

    SUBCASE("positive homogeneity") {
        const WeightedChiSquare base(make_weights({3.0, 1.0}));
        const WeightedChiSquare scaled(make_weights({12.0, 4.0}));
        CHECK(quantile(scaled, 0.9) == doctest::Approx(4.0 * quantile(base, 0.9)).epsilon(1e-5));
    }

    SUBCASE("round trip through the tail probability") {
        const WeightedChiSquare dist(make_weights({5.0, 2.0, 0.5, 0.1}));
        for (Real level : {0.8, 0.95}) {
            const Real q = quantile(dist, level);
            CHECK(tail_probability(dist, q) == doctest::Approx(1.0 - level).epsilon(1e-4));
        }
    }

    CHECK_THROWS_AS(quantile(unit, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(quantile(unit, 1.0), std::invalid_argument);
}

TEST_CASE("Monte-Carlo oracle") {
    const WeightedChiSquare dist(make_weights({8.0, 4.0, 2.0}));
    CHECK(mc_tail_oracle(dist, -1.0, 1000, 1) == 1.0);
    CHECK(mc_tail_oracle(dist, 1e12 * 14.0, 1000, 1) == 0.0);
    CHECK(mc_tail_oracle(dist, 14.0, 5000, 7) == mc_tail_oracle(dist, 14.0, 5000, 7));
    CHECK_THROWS_AS(mc_tail_oracle(dist, 14.0, 0, 1), std::invalid_argument);
}

TEST_CASE("simulated mean and variance match the weight sums") {
    const Vector w = make_weights({3.0, 2.0, 1.0});
    const WeightedChiSquare dist(w);
    const Index n = 200000;
    std::mt19937_64 rng(515);
    std::normal_distribution<Real> normal;
    std::vector<Real> draws(n);
    for (Index i = 0; i < n; ++i) {
        Real v = 0;
        for (Index m = 0; m < w.size(); ++m) {
            const Real z = normal(rng);
            v += w[m] * z * z;
        }
        draws[i] = v;
    }
    Real mean = 0;
    for (Real v : draws)
        mean += v;
    mean /= n;
    Real var = 0, m4 = 0;
    for (Real v : draws) {
        const Real d = v - mean;
        var += d * d;
        m4 += d * d * d * d;
    }
    var /= (n - 1);
    m4 /= n;

    CHECK(std::abs(mean - dist.mean()) <= 5.0 * std::sqrt(var / n));
    const Real se_var = std::sqrt((m4 - var * var) / n);
    CHECK(std::abs(var - dist.variance()) <= 5.0 * se_var);
}

TEST_CASE("inversion integral agrees with the oracle on random weight sets") {
    std::mt19937_64 rng(626);
    std::uniform_real_distribution<Real> unif(0.05, 3.0);
    std::uniform_int_distribution<Index> size(1, 20);
    const Index draws = 200000;
    for (int set = 0; set < 10; ++set) {
        Vector w(size(rng));
        for (Index i = 0; i < w.size(); ++i)
            w[i] = unif(rng);
        const WeightedChiSquare dist{Vector(w)};
        const Real m = dist.mean();
        const Real sd = std::sqrt(dist.variance());
        int threshold_index = 0;
        for (Real x : {0.5 * m, m, m + 2.0 * sd}) {
            const Real p = tail_probability(dist, x);
            const Real phat = mc_tail_oracle(dist, x, draws, 1000 + 10 * set + threshold_index);
            ++threshold_index;
            // exceedance frequency standard error is at most 0.5 / sqrt(n)
            CHECK(std::abs(p - phat) <= 4.0 * 0.5 / std::sqrt(static_cast<Real>(draws)));
        }
    }
}
