#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "spdecov/estimator.hpp"
#include "spdecov/kernels.hpp"
#include "spdecov/observation.hpp"
#include "spdecov/spectral.hpp"
#include "spdecov/types.hpp"

namespace spdecov {

// Splitmix-style mixing of a master seed with stream labels, so that distinct
// replications (and experiment cells) get decorrelated, reproducible streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);
std::mt19937_64 rng_stream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0);

struct SimulationConfig {
    Real horizon = 1.0;
    Real sim_step = 0;
    Vector fine_grid;          // uniform with endpoints 0 and 1
    std::uint64_t seed = 0;
    Vector initial_condition;  // empty means zero; mode coefficients for the
                               // spectral route, nodal values for the FEM route

    SimulationConfig(Real t, Real step, Vector grid, std::uint64_t seed_,
                     Vector init = Vector());
    Index steps() const { return steps_; }

  private:
    Index steps_ = 0;
};

enum class PathRepresentation { ModeCoefficients, NodalValues };

struct PathLattice {
    Matrix values;  // (steps+1) x (number of modes or nodes); row 0 = initial state
    Real sim_step = 0;
    Vector fine_grid;
    PathRepresentation representation = PathRepresentation::NodalValues;
};

// Variance of the exact Ornstein-Uhlenbeck transition noise over one step:
// mu (1 - e^{-2 lambda delta}) / (2 lambda).
Real ou_transition_variance(Real lambda, Real mu, Real delta);

// Exact simulation of the mode coefficients a_j under the semigroup of op and
// noise intensities mu: a_j(t+d) = e^{-lambda_j d} a_j(t) + eta_j. Path p uses
// the stream (cfg.seed, p).
std::vector<PathLattice> simulate_spectral(const SpectralOperator& op, const Vector& mu,
                                           const SimulationConfig& cfg, Index n_paths);

// Evaluates a mode-coefficient path on a spatial grid.
PathLattice modes_to_grid(const PathLattice& path, const SpectralOperator& op,
                          const Vector& grid);

// Stationary Gaussian field sampler on a uniform grid via circulant
// embedding. The embedding is padded (doubled up to twice) until its spectrum
// is nonnegative; residual negative eigenvalues are clipped and their mass
// recorded, with a hard failure when the clipped mass is not negligible.
class MaternFieldSampler {
  public:
    MaternFieldSampler(MaternParams params, const Vector& grid);

    Vector draw(std::mt19937_64& rng) const;
    Real clipped_mass() const { return clipped_mass_; }
    Real min_embedding_eigenvalue() const { return min_eig_; }
    Index embedding_size() const { return embedding_size_; }

  private:
    Index n_ = 0;
    Index embedding_size_ = 0;
    Vector sqrt_eig_;  // sqrt(eigenvalue / embedding size), clipped at zero
    Real clipped_mass_ = 0;
    Real min_eig_ = 0;
};

// One draw of a centered Gaussian vector with covariance [q(x_i, x_j)] for
// the Matern kernel q on a uniform grid.
Vector sample_matern_field(const MaternParams& params, const Vector& grid,
                           std::mt19937_64& rng);

// Backward-Euler P1 finite element discretization of the parabolic equation
// driven by Matern space-time noise: (M + dt K) x_n = M (x_{n-1} + xi_n) with
// xi_n = sqrt(dt) times an independent Matern field draw at the nodes.
PathLattice simulate_fem(const SpectralOperator& op, const MaternParams& matern,
                         const SimulationConfig& cfg);

// Same time stepping driven by a general nodal noise field F z with
// z ~ N(0, I), i.e. the field covariance is F F^T. Used to drive the finite
// element scheme with a non-Matern (for instance tabulated) kernel.
PathLattice simulate_fem(const SpectralOperator& op, const Matrix& noise_factor,
                         const SimulationConfig& cfg);

// Restriction of a nodal path to discrete observations: every (obs_step /
// sim_step)-th time row, spatially reduced per the scheme (vertex values for
// Pointwise, cell averages for LocalAverage).
PathObservations subsample(const PathLattice& path, Real obs_step,
                           std::shared_ptr<const ObservationScheme> scheme);

// Time-only restriction of a mode-coefficient path, for diagnostics that work
// directly on spectral coefficients.
PathObservations subsample_modes(const PathLattice& path, Real obs_step);

} // namespace spdecov
