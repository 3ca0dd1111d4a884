#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <stdexcept>

#include "spdecov/kernels.hpp"

using namespace spdecov;

namespace {

constexpr Real kPi = std::numbers::pi_v<Real>;

std::shared_ptr<const SpectralOperator> dirichlet(Index modes) {
    return std::make_shared<const SpectralOperator>(Boundary::Dirichlet, 0.0, 1.0, modes);
}

} // namespace

TEST_CASE("Matern diagonal equals the variance exactly") {
    const MaternKernel q({2.5, 0.75, 0.3});
    CHECK(q(0.4, 0.4) == 2.5);
    CHECK(q(0.0, 0.0) == 2.5);
    CHECK(q(1.0, 1.0) == 2.5);
}

TEST_CASE("Matern nu = 1/2 reduces to the exponential kernel") {
    // sqrt(2 nu) = 1, so q(x,y) = exp(-|x-y| / rho) for rho = 1
    const MaternKernel q({1.0, 0.5, 1.0});
    CHECK(q(0.0, 0.5) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    CHECK(q(0.25, 0.75) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    CHECK(q(0.0, 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("Matern construction and evaluation reject invalid input") {
    CHECK_THROWS_AS(MaternKernel({0.0, 0.5, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(MaternKernel({1.0, -0.5, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(MaternKernel({1.0, 0.5, 0.0}), std::invalid_argument);
    const MaternKernel q({1.0, 0.5, 1.0});
    CHECK_THROWS_AS(q(std::numeric_limits<Real>::quiet_NaN(), 0.5), std::domain_error);
    CHECK_THROWS_AS(q(0.5, std::numeric_limits<Real>::infinity()), std::domain_error);
}

TEST_CASE("operator-power kernel evaluates the truncated eigenseries") {
    SUBCASE("single Dirichlet mode") {
        const OperatorPowerKernel q(dirichlet(1), 0.5);
        // q(x,y) = lambda_1^{-1} e_1(x) e_1(y); at (1/2, 1/2) this is 2/pi^2
        CHECK(q(0.5, 0.5) == doctest::Approx(2.0 / (kPi * kPi)).epsilon(1e-13));
        CHECK(q(0.0, 0.5) == doctest::Approx(0.0).epsilon(1e-14));
    }

    SUBCASE("mode weights are lambda^{-(nu + 1/2)}") {
        const OperatorPowerKernel q(dirichlet(4), 0.25);
        const Vector& mu = q.mode_weights();
        REQUIRE(mu.size() == 4);
        for (Index j = 0; j < 4; ++j) {
            const Real lam = q.op().eigenvalue(j + 1);
            CHECK(mu[j] == doctest::Approx(std::pow(lam, -0.75)).epsilon(1e-13));
        }
    }

    CHECK_THROWS_AS(OperatorPowerKernel(nullptr, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(OperatorPowerKernel(dirichlet(2), 0.0), std::invalid_argument);
}

TEST_CASE("coefficient matrix samples the kernel on the scheme") {
    SUBCASE("pointwise vertices, exponential kernel") {
        const Kernel q = MaternKernel({1.0, 0.5, 1.0});
        const auto scheme = ObservationScheme::pointwise(Subdivision::uniform(2));
        const Matrix c = coefficient_matrix(q, scheme);
        REQUIRE(c.rows() == 3);
        CHECK(c(0, 2) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
        CHECK(c(0, 0) == 1.0);
        CHECK(c(0, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
        CHECK((c - c.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("local averages sample at centroids") {
        const Kernel q = MaternKernel({1.0, 0.5, 1.0});
        const auto scheme = ObservationScheme::local_average(Subdivision::uniform(2));
        const Matrix c = coefficient_matrix(q, scheme);
        REQUIRE(c.rows() == 2);
        CHECK(c(0, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    }

    SUBCASE("the commuting fast path agrees with direct evaluation") {
        const Kernel q = OperatorPowerKernel(dirichlet(16), 0.5);
        const auto scheme = ObservationScheme::pointwise(Subdivision::uniform(4));
        const Matrix c = coefficient_matrix(q, scheme);
        const Vector pts = scheme.coordinates();
        for (Index i = 0; i < pts.size(); ++i)
            for (Index j = 0; j < pts.size(); ++j)
                CHECK(c(i, j) ==
                      doctest::Approx(kernel_value(q, pts[i], pts[j])).epsilon(1e-12));
    }

    SUBCASE("identity-grid schemes are rejected") {
        const Kernel q = MaternKernel({1.0, 0.5, 1.0});
        const auto scheme = ObservationScheme::identity_grid(Subdivision::uniform(4));
        CHECK_THROWS_AS(coefficient_matrix(q, scheme), std::invalid_argument);
    }
}

TEST_CASE("kernel symmetry") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<Real> unif(0.0, 1.0);

    const Kernel matern = MaternKernel({1.3, 0.8, 0.4});
    const Kernel commuting = OperatorPowerKernel(dirichlet(32), 0.375);
    for (int i = 0; i < 20; ++i) {
        const Real x = unif(rng), y = unif(rng);
        CHECK(kernel_value(matern, x, y) == kernel_value(matern, y, x));
        CHECK(kernel_value(commuting, x, y) == kernel_value(commuting, y, x));
    }

    // bilinear interpolation may reassociate the corner sum under an argument
    // swap, so the tabulated check carries a round-off tolerance
    Vector grid(3);
    grid << 0.0, 0.5, 1.0;
    Matrix vals(3, 3);
    vals << 1.0, 0.6, 0.2,
            0.6, 1.0, 0.6,
            0.2, 0.6, 1.0;
    const Kernel tab = TabulatedKernel(grid, vals);
    for (int i = 0; i < 20; ++i) {
        const Real x = unif(rng), y = unif(rng);
        CHECK(kernel_value(tab, x, y) ==
              doctest::Approx(kernel_value(tab, y, x)).epsilon(1e-14));
    }
}

TEST_CASE("reference eigenvalues of the commuting kernel") {
    const Kernel q = OperatorPowerKernel(dirichlet(8), 0.5);
    const Vector mu = reference_eigenvalues(q, 2);
    REQUIRE(mu.size() == 2);
    CHECK(mu[0] == doctest::Approx(1.0 / (kPi * kPi)).epsilon(1e-13));
    CHECK(mu[1] == doctest::Approx(1.0 / (4.0 * kPi * kPi)).epsilon(1e-13));
    CHECK(mu[0] > mu[1]);

    CHECK(reference_eigenvalues(q, 0).size() == 0);
    CHECK_THROWS_AS(reference_eigenvalues(q, 9), std::out_of_range);
    CHECK_THROWS_AS(reference_eigenvalues(Kernel(MaternKernel({1.0, 0.5, 1.0})), 2),
                    std::invalid_argument);
}

TEST_CASE("Matern Gram matrices are positive semidefinite") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<Real> unif(0.0, 1.0);
    const MaternKernel q({1.0, 0.375, 0.5});
    for (int set = 0; set < 5; ++set) {
        Vector pts(6);
        for (Index i = 0; i < 6; ++i)
            pts[i] = unif(rng);
        Matrix c(6, 6);
        for (Index i = 0; i < 6; ++i)
            for (Index j = 0; j < 6; ++j)
                c(i, j) = q(pts[i], pts[j]);
        const Eigen::SelfAdjointEigenSolver<Matrix> eig(c);
        CHECK(eig.eigenvalues().minCoeff() >= -1e-9);
    }
}

TEST_CASE("series truncation has converged at 512 modes") {
    // The neglected tail is bounded by 2 sum_{j>512} (j pi)^{-(2 nu + 1)}:
    // about 4e-4 at nu = 1/2 and 1.3e-7 at nu = 1.
    auto max_grid_diff = [](Real nu) {
        const OperatorPowerKernel coarse(dirichlet(512), nu);
        const OperatorPowerKernel fine(dirichlet(1024), nu);
        Real max_diff = 0;
        for (Index i = 0; i <= 32; ++i)
            for (Index j = 0; j <= 32; ++j) {
                const Real x = i / 32.0, y = j / 32.0;
                max_diff = std::max(max_diff, std::abs(coarse(x, y) - fine(x, y)));
            }
        return max_diff;
    };
    CHECK(max_grid_diff(1.0) <= 1e-6);
    CHECK(max_grid_diff(0.5) <= 4e-4);
}

TEST_CASE("tabulated kernel interpolates its grid values") {
    Vector grid(3);
    grid << 0.0, 0.5, 1.0;
    Matrix vals(3, 3);
    vals << 4.0, 2.0, 1.0,
            2.0, 4.0, 2.0,
            1.0, 2.0, 4.0;
    const TabulatedKernel q(grid, vals);

    CHECK(q(0.0, 0.0) == 4.0);
    CHECK(q(0.5, 1.0) == 2.0);
    // midpoint of the first cell in x, on-grid in y
    CHECK(q(0.25, 0.0) == doctest::Approx(3.0).epsilon(1e-14));
    // center of the lower-left cell averages its four corners
    CHECK(q(0.25, 0.25) == doctest::Approx((4.0 + 2.0 + 2.0 + 4.0) / 4.0).epsilon(1e-14));

    SUBCASE("constant tables evaluate to the constant everywhere") {
        const TabulatedKernel c(grid, Matrix::Constant(3, 3, 1.5));
        for (Real x : {0.0, 0.2, 0.77, 1.0})
            for (Real y : {0.1, 0.5, 0.9})
                CHECK(c(x, y) == doctest::Approx(1.5).epsilon(1e-15));
    }

    SUBCASE("construction rejects bad tables") {
        Matrix asym = vals;
        asym(0, 1) = 7.0;
        CHECK_THROWS_AS(TabulatedKernel(grid, asym), std::invalid_argument);
        Vector bad_grid(3);
        bad_grid << 0.0, 0.6, 0.4;
        CHECK_THROWS_AS(TabulatedKernel(bad_grid, vals), std::invalid_argument);
        CHECK_THROWS_AS(TabulatedKernel(grid, Matrix::Identity(2, 2)), std::invalid_argument);
    }
}

TEST_CASE("tabulated kernel round-trips through its CSV layout") {
    const std::string path = "/tmp/spdecov_test_kernel.csv";
    {
        std::ofstream out(path);
        out << "x,0,0.5,1\n";
        out << "0,4,2,1\n";
        out << "0.5,2,4,2\n";
        out << "1,1,2,4\n";
    }
    const TabulatedKernel q = TabulatedKernel::from_csv(path);
    CHECK(q.grid().size() == 3);
    CHECK(q.values()(1, 1) == 4.0);
    CHECK(q(0.5, 0.0) == 2.0);
    std::remove(path.c_str());

    SUBCASE("rows must repeat the header grid") {
        {
            std::ofstream out(path);
            out << "x,0,0.5,1\n0,4,2,1\n0.25,2,4,2\n1,1,2,4\n";
        }
        CHECK_THROWS_AS(TabulatedKernel::from_csv(path), ConfigError);
        std::remove(path.c_str());
    }

    CHECK_THROWS_AS(TabulatedKernel::from_csv("/tmp/spdecov_no_such_kernel.csv"), ConfigError);
}

TEST_CASE("kernel labels identify the model and parameters") {
    CHECK(kernel_label(Kernel(MaternKernel({1.0, 0.375, 0.5}))) == "matern(1,0.375,0.5)");
    CHECK(kernel_label(Kernel(OperatorPowerKernel(dirichlet(4), 0.5))) == "commuting(nu=0.5)");
    Vector grid(2);
    grid << 0.0, 1.0;
    CHECK(kernel_label(Kernel(TabulatedKernel(grid, Matrix::Constant(2, 2, 1.0)))) ==
          "tabulated(2)");
}

TEST_CASE("parameter boxes validate their bounds") {
    Vector lo(2), up(2);
    lo << 0.1, 0.2;
    up << 1.0, 2.0;
    const ParameterBox box(lo, up, {"a", "b"});
    CHECK(box.dim() == 2);

    CHECK_THROWS_AS(ParameterBox(lo, Vector::Ones(3), {"a", "b", "c"}), std::invalid_argument);
    CHECK_THROWS_AS(ParameterBox(lo, up, {"a"}), std::invalid_argument);
    Vector bad_lo(2);
    bad_lo << 0.0, 0.2;
    CHECK_THROWS_AS(ParameterBox(bad_lo, up, {"a", "b"}), std::invalid_argument);
    Vector crossed(2);
    crossed << 2.0, 0.2;
    CHECK_THROWS_AS(ParameterBox(crossed, up, {"a", "b"}), std::invalid_argument);
}
