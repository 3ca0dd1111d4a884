#include "spdecov/sampler.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <unsupported/Eigen/FFT>

namespace spdecov {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t state = seed;
    std::uint64_t out = splitmix64(state);
    state ^= a * 0xd1342543de82ef95ull + 0x2545f4914f6cdd1dull;
    out ^= splitmix64(state);
    state ^= b * 0xda942042e4dd58b5ull + 0x9e3779b97f4a7c15ull;
    out ^= splitmix64(state);
    return out;
}

std::mt19937_64 rng_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return std::mt19937_64(derive_seed(seed, a, b));
}

SimulationConfig::SimulationConfig(Real t, Real step, Vector grid, std::uint64_t seed_,
                                   Vector init)
    : horizon(t), sim_step(step), fine_grid(std::move(grid)), seed(seed_),
      initial_condition(std::move(init)) {
    if (!(horizon > 0) || !(sim_step > 0))
        throw ConfigError("SimulationConfig: horizon and sim_step must be > 0");
    const Real ratio = horizon / sim_step;
    steps_ = static_cast<Index>(std::llround(ratio));
    if (steps_ < 1 || std::abs(ratio - static_cast<Real>(steps_)) > 1e-12 * ratio)
        throw ConfigError("SimulationConfig: sim_step must divide horizon");
    if (fine_grid.size() > 0) {
        if (fine_grid.size() < 2 || std::abs(fine_grid[0]) > 1e-12
            || std::abs(fine_grid[fine_grid.size() - 1] - 1.0) > 1e-12)
            throw ConfigError("SimulationConfig: fine grid must span [0,1]");
        for (Index i = 0; i + 1 < fine_grid.size(); ++i)
            if (!(fine_grid[i] < fine_grid[i + 1]))
                throw ConfigError("SimulationConfig: fine grid must be strictly increasing");
    }
}

Real ou_transition_variance(Real lambda, Real mu, Real delta) {
    if (!(lambda > 0) || mu < 0 || delta < 0)
        throw std::domain_error("ou_transition_variance: invalid parameters");
    // expm1 keeps precision when 2 lambda delta is tiny.
    return -mu * std::expm1(-2.0 * lambda * delta) / (2.0 * lambda);
}

std::vector<PathLattice> simulate_spectral(const SpectralOperator& op, const Vector& mu,
                                           const SimulationConfig& cfg, Index n_paths) {
    if (mu.size() != op.mode_count())
        throw std::invalid_argument("simulate_spectral: mu length must equal mode count");
    if ((mu.array() < 0).any())
        throw std::domain_error("simulate_spectral: negative noise intensity");
    if (n_paths < 1)
        throw std::invalid_argument("simulate_spectral: need at least one path");
    const Index n_modes = op.mode_count();
    const Index n_steps = cfg.steps();
    Vector init = Vector::Zero(n_modes);
    if (cfg.initial_condition.size() > 0) {
        if (cfg.initial_condition.size() != n_modes)
            throw ConfigError("simulate_spectral: initial condition length must equal mode count");
        init = cfg.initial_condition;
    }
    const Vector lam = op.eigenvalues();
    const Vector decay = (-lam.array() * cfg.sim_step).exp().matrix();
    Vector noise_sd(n_modes);
    for (Index m = 0; m < n_modes; ++m)
        noise_sd[m] = std::sqrt(ou_transition_variance(lam[m], mu[m], cfg.sim_step));

    std::vector<PathLattice> paths;
    paths.reserve(static_cast<std::size_t>(n_paths));
    for (Index p = 0; p < n_paths; ++p) {
        auto rng = rng_stream(cfg.seed, static_cast<std::uint64_t>(p));
        std::normal_distribution<Real> normal(0.0, 1.0);
        Matrix values(n_steps + 1, n_modes);
        values.row(0) = init.transpose();
        for (Index i = 1; i <= n_steps; ++i)
            for (Index m = 0; m < n_modes; ++m)
                values(i, m) = decay[m] * values(i - 1, m) + noise_sd[m] * normal(rng);
        paths.push_back(PathLattice{std::move(values), cfg.sim_step, cfg.fine_grid,
                                    PathRepresentation::ModeCoefficients});
    }
    return paths;
}

PathLattice modes_to_grid(const PathLattice& path, const SpectralOperator& op,
                          const Vector& grid) {
    if (path.representation != PathRepresentation::ModeCoefficients)
        throw std::invalid_argument("modes_to_grid: path is already nodal");
    if (path.values.cols() != op.mode_count())
        throw std::invalid_argument("modes_to_grid: mode count mismatch");
    const Matrix basis = op.basis_matrix(grid);  // modes x grid points
    return PathLattice{path.values * basis, path.sim_step, grid,
                       PathRepresentation::NodalValues};
}

MaternFieldSampler::MaternFieldSampler(MaternParams params, const Vector& grid)
    : n_(grid.size()) {
    if (n_ < 2)
        throw std::invalid_argument("MaternFieldSampler: need at least two grid points");
    const Real spacing = grid[1] - grid[0];
    for (Index i = 0; i + 1 < n_; ++i)
        if (std::abs((grid[i + 1] - grid[i]) - spacing) > 1e-12)
            throw std::invalid_argument("MaternFieldSampler: grid must be uniform");
    if (params.variance < 0 || !(params.smoothness > 0) || !(params.range > 0))
        throw std::invalid_argument("MaternFieldSampler: invalid parameters");

    if (params.variance == 0) {
        embedding_size_ = 2 * (n_ - 1);
        sqrt_eig_ = Vector::Zero(embedding_size_);
        return;
    }
    const MaternKernel kernel(params);

    Index m = 2 * (n_ - 1);
    Eigen::FFT<Real> fft;
    Vector eig;
    for (int attempt = 0; attempt < 3; ++attempt) {
        Vector row(m);
        for (Index k = 0; k < m; ++k) {
            const Index wrapped = std::min(k, m - k);
            row[k] = kernel(static_cast<Real>(wrapped) * spacing, 0.0);
        }
        std::vector<std::complex<Real>> freq(static_cast<std::size_t>(m));
        std::vector<Real> row_std(row.data(), row.data() + m);
        fft.fwd(freq, row_std);
        eig.resize(m);
        for (Index k = 0; k < m; ++k)
            eig[k] = freq[static_cast<std::size_t>(k)].real();
        if (eig.minCoeff() > -1e-10)
            break;
        if (attempt < 2)
            m *= 2;
    }
    min_eig_ = eig.minCoeff();
    Real clipped = 0;
    for (Index k = 0; k < m; ++k)
        if (eig[k] < 0) {
            clipped -= eig[k];
            eig[k] = 0;
        }
    clipped_mass_ = clipped;
    if (clipped > 0.1 * eig.sum())
        throw NumericalError("MaternFieldSampler: circulant embedding failed; "
                             "smallest embedding eigenvalue "
                             + std::to_string(min_eig_));
    embedding_size_ = m;
    sqrt_eig_ = (eig / static_cast<Real>(m)).cwiseSqrt();
}

Vector MaternFieldSampler::draw(std::mt19937_64& rng) const {
    std::normal_distribution<Real> normal(0.0, 1.0);
    const Index m = embedding_size_;
    std::vector<std::complex<Real>> z(static_cast<std::size_t>(m));
    for (Index k = 0; k < m; ++k) {
        const Real re = normal(rng);
        const Real im = normal(rng);
        z[static_cast<std::size_t>(k)] = sqrt_eig_[k] * std::complex<Real>(re, im);
    }
    std::vector<std::complex<Real>> freq(static_cast<std::size_t>(m));
    Eigen::FFT<Real> fft;
    fft.fwd(freq, z);
    Vector out(n_);
    for (Index k = 0; k < n_; ++k)
        out[k] = freq[static_cast<std::size_t>(k)].real();
    return out;
}

Vector sample_matern_field(const MaternParams& params, const Vector& grid,
                           std::mt19937_64& rng) {
    return MaternFieldSampler(params, grid).draw(rng);
}

namespace {

template <typename DrawField>
PathLattice fem_stepping(const SpectralOperator& op, const SimulationConfig& cfg,
                         DrawField&& draw_field) {
    if (op.boundary() != Boundary::Neumann)
        throw std::invalid_argument("simulate_fem: operator must have Neumann boundary");
    if (cfg.fine_grid.size() < 3)
        throw ConfigError("simulate_fem: fine grid required");
    const Index n = cfg.fine_grid.size();
    const Real hf = cfg.fine_grid[1] - cfg.fine_grid[0];
    const Real dt = cfg.sim_step;

    using Sparse = Eigen::SparseMatrix<Real>;
    std::vector<Eigen::Triplet<Real>> mass_t, stiff_t;
    for (Index i = 0; i < n; ++i) {
        const bool interior = i > 0 && i + 1 < n;
        mass_t.emplace_back(i, i, interior ? 4.0 * hf / 6.0 : hf / 3.0);
        stiff_t.emplace_back(i, i, interior ? 2.0 / hf : 1.0 / hf);
        if (i + 1 < n) {
            mass_t.emplace_back(i, i + 1, hf / 6.0);
            mass_t.emplace_back(i + 1, i, hf / 6.0);
            stiff_t.emplace_back(i, i + 1, -1.0 / hf);
            stiff_t.emplace_back(i + 1, i, -1.0 / hf);
        }
    }
    Sparse mass(n, n), stiff(n, n);
    mass.setFromTriplets(mass_t.begin(), mass_t.end());
    stiff.setFromTriplets(stiff_t.begin(), stiff_t.end());
    const Sparse reaction = op.base_shift() * mass + op.diffusivity() * stiff;
    const Sparse system = mass + dt * reaction;
    Eigen::SimplicialLDLT<Sparse> solver(system);
    if (solver.info() != Eigen::Success)
        throw NumericalError("simulate_fem: backward Euler system factorization failed");

    auto rng = rng_stream(cfg.seed, 0);
    const Real sqrt_dt = std::sqrt(dt);

    const Index n_steps = cfg.steps();
    Matrix values(n_steps + 1, n);
    Vector state = Vector::Zero(n);
    if (cfg.initial_condition.size() > 0) {
        if (cfg.initial_condition.size() != n)
            throw ConfigError("simulate_fem: initial condition length must match fine grid");
        state = cfg.initial_condition;
    }
    values.row(0) = state.transpose();
    for (Index i = 1; i <= n_steps; ++i) {
        const Vector noise = sqrt_dt * draw_field(rng);
        state = solver.solve(mass * (state + noise));
        values.row(i) = state.transpose();
    }
    return PathLattice{std::move(values), dt, cfg.fine_grid,
                       PathRepresentation::NodalValues};
}

} // namespace

PathLattice simulate_fem(const SpectralOperator& op, const MaternParams& matern,
                         const SimulationConfig& cfg) {
    if (cfg.fine_grid.size() < 3)
        throw ConfigError("simulate_fem: fine grid required");
    const MaternFieldSampler field(matern, cfg.fine_grid);
    return fem_stepping(op, cfg,
                        [&](std::mt19937_64& rng) { return field.draw(rng); });
}

PathLattice simulate_fem(const SpectralOperator& op, const Matrix& noise_factor,
                         const SimulationConfig& cfg) {
    if (noise_factor.rows() != cfg.fine_grid.size())
        throw std::invalid_argument("simulate_fem: factor rows must match fine grid");
    return fem_stepping(op, cfg, [&](std::mt19937_64& rng) {
        std::normal_distribution<Real> normal(0.0, 1.0);
        Vector z(noise_factor.cols());
        for (Index k = 0; k < z.size(); ++k)
            z[k] = normal(rng);
        return Vector(noise_factor * z);
    });
}

PathObservations subsample(const PathLattice& path, Real obs_step,
                           std::shared_ptr<const ObservationScheme> scheme) {
    if (path.representation != PathRepresentation::NodalValues)
        throw std::invalid_argument("subsample: convert mode coefficients to nodal values first");
    if (!scheme)
        throw std::invalid_argument("subsample: null scheme");
    const Real ratio = obs_step / path.sim_step;
    const Index stride = static_cast<Index>(std::llround(ratio));
    if (stride < 1 || std::abs(ratio - static_cast<Real>(stride)) > 1e-12 * ratio)
        throw ConfigError("subsample: observation step must be a multiple of the simulation step");
    const Index n_rows = (path.values.rows() - 1) / stride + 1;
    const Real horizon = static_cast<Real>(path.values.rows() - 1) * path.sim_step;

    Matrix out(n_rows, scheme->dim());
    if (scheme->kind() == SchemeKind::LocalAverage) {
        for (Index r = 0; r < n_rows; ++r)
            out.row(r) = project_average(*scheme, path.values.row(r * stride).transpose(),
                                         path.fine_grid)
                             .transpose();
    } else {
        const Vector pts = scheme->coordinates();
        std::vector<Index> node(static_cast<std::size_t>(pts.size()));
        for (Index k = 0; k < pts.size(); ++k) {
            Index best = 0;
            (path.fine_grid.array() - pts[k]).abs().minCoeff(&best);
            if (std::abs(path.fine_grid[best] - pts[k]) > 1e-12)
                throw ConfigError("subsample: observation vertex not on the fine grid");
            node[static_cast<std::size_t>(k)] = best;
        }
        for (Index r = 0; r < n_rows; ++r)
            for (Index k = 0; k < pts.size(); ++k)
                out(r, k) = path.values(r * stride, node[static_cast<std::size_t>(k)]);
    }
    return PathObservations(std::move(out), obs_step, horizon, std::move(scheme));
}

PathObservations subsample_modes(const PathLattice& path, Real obs_step) {
    if (path.representation != PathRepresentation::ModeCoefficients)
        throw std::invalid_argument("subsample_modes: path must hold mode coefficients");
    const Real ratio = obs_step / path.sim_step;
    const Index stride = static_cast<Index>(std::llround(ratio));
    if (stride < 1 || std::abs(ratio - static_cast<Real>(stride)) > 1e-12 * ratio)
        throw ConfigError("subsample_modes: observation step must be a multiple of the simulation step");
    const Index n_rows = (path.values.rows() - 1) / stride + 1;
    const Real horizon = static_cast<Real>(path.values.rows() - 1) * path.sim_step;
    Matrix out(n_rows, path.values.cols());
    for (Index r = 0; r < n_rows; ++r)
        out.row(r) = path.values.row(r * stride);
    return PathObservations(std::move(out), obs_step, horizon, nullptr, true);
}

} // namespace spdecov
