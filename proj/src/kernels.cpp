#include "spdecov/kernels.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace spdecov {

MaternKernel::MaternKernel(MaternParams params) : params_(params) {
    if (!(params.variance > 0) || !(params.smoothness > 0) || !(params.range > 0))
        throw std::invalid_argument("MaternKernel: variance, smoothness and range must be > 0");
    prefactor_ = std::pow(2.0, 1.0 - params.smoothness) / std::tgamma(params.smoothness);
}

Real MaternKernel::operator()(Real x, Real y) const {
    if (!std::isfinite(x) || !std::isfinite(y))
        throw std::domain_error("MaternKernel: non-finite input");
    const Real h = std::abs(x - y);
    if (h < 1e-14)
        return params_.variance;
    const Real z = std::sqrt(2.0 * params_.smoothness) * h / params_.range;
    return params_.variance * prefactor_ * std::pow(z, params_.smoothness)
           * std::cyl_bessel_k(params_.smoothness, z);
}

OperatorPowerKernel::OperatorPowerKernel(std::shared_ptr<const SpectralOperator> op,
                                         Real smoothness)
    : op_(std::move(op)), smoothness_(smoothness) {
    if (!op_)
        throw std::invalid_argument("OperatorPowerKernel: null operator");
    if (!(smoothness > 0))
        throw std::invalid_argument("OperatorPowerKernel: smoothness must be > 0");
    const Vector lam = op_->eigenvalues();
    mode_weights_ = lam.array().pow(-(smoothness_ + 0.5)).matrix();
}

Real OperatorPowerKernel::operator()(Real x, Real y) const {
    if (!std::isfinite(x) || !std::isfinite(y))
        throw std::domain_error("OperatorPowerKernel: non-finite input");
    Real sum = 0;
    const Index j0 = op_->first_mode();
    // The eigenfunction pair is multiplied first so swapping the arguments
    // reorders nothing and q(x,y) == q(y,x) holds exactly.
    for (Index m = 0; m < op_->mode_count(); ++m)
        sum += mode_weights_[m]
               * (op_->eigenfunction_value(j0 + m, x) * op_->eigenfunction_value(j0 + m, y));
    return sum;
}

TabulatedKernel::TabulatedKernel(Vector grid, Matrix values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (grid_.size() < 2)
        throw std::invalid_argument("TabulatedKernel: need at least two grid points");
    if (values_.rows() != grid_.size() || values_.cols() != grid_.size())
        throw std::invalid_argument("TabulatedKernel: value matrix must match the grid");
    for (Index i = 0; i + 1 < grid_.size(); ++i)
        if (!(grid_[i] < grid_[i + 1]))
            throw std::invalid_argument("TabulatedKernel: grid must be strictly increasing");
    if (grid_[0] < 0.0 || grid_[grid_.size() - 1] > 1.0)
        throw std::invalid_argument("TabulatedKernel: grid must lie in [0,1]");
    const Real scale = std::max(Real(1), values_.cwiseAbs().maxCoeff());
    if (((values_ - values_.transpose()).cwiseAbs().maxCoeff()) > 1e-10 * scale)
        throw std::invalid_argument("TabulatedKernel: value matrix is not symmetric");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    return out;
}

} // namespace

TabulatedKernel TabulatedKernel::from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("TabulatedKernel: cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw ConfigError("TabulatedKernel: empty file " + path);
    auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "x")
        throw ConfigError("TabulatedKernel: header must be \"x,<grid...>\" in " + path);
    const Index n = static_cast<Index>(header.size()) - 1;
    Vector grid(n);
    for (Index i = 0; i < n; ++i) {
        try {
            grid[i] = std::stod(header[static_cast<std::size_t>(i) + 1]);
        } catch (const std::exception&) {
            throw ConfigError("TabulatedKernel: non-numeric grid coordinate in " + path);
        }
    }
    Matrix values(n, n);
    Index row = 0;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        if (row >= n)
            throw ConfigError("TabulatedKernel: too many rows in " + path);
        auto cells = split_csv_line(line);
        if (static_cast<Index>(cells.size()) != n + 1)
            throw ConfigError("TabulatedKernel: ragged row in " + path);
        try {
            if (std::abs(std::stod(cells[0]) - grid[row]) > 1e-12)
                throw ConfigError("TabulatedKernel: row coordinate mismatch in " + path);
            for (Index c = 0; c < n; ++c)
                values(row, c) = std::stod(cells[static_cast<std::size_t>(c) + 1]);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("TabulatedKernel: non-numeric value in " + path);
        }
        ++row;
    }
    if (row != n)
        throw ConfigError("TabulatedKernel: missing rows in " + path);
    try {
        return TabulatedKernel(std::move(grid), std::move(values));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("TabulatedKernel: ") + e.what() + " in " + path);
    }
}

Real TabulatedKernel::operator()(Real x, Real y) const {
    if (!std::isfinite(x) || !std::isfinite(y))
        throw std::domain_error("TabulatedKernel: non-finite input");
    auto locate = [&](Real v) -> std::pair<Index, Real> {
        if (v <= grid_[0])
            return {0, 0.0};
        if (v >= grid_[grid_.size() - 1])
            return {grid_.size() - 2, 1.0};
        Index c = 0;
        while (c + 2 < grid_.size() && v >= grid_[c + 1])
            ++c;
        return {c, (v - grid_[c]) / (grid_[c + 1] - grid_[c])};
    };
    const auto [i, s] = locate(x);
    const auto [j, t] = locate(y);
    return (1 - s) * (1 - t) * values_(i, j) + s * (1 - t) * values_(i + 1, j)
           + (1 - s) * t * values_(i, j + 1) + s * t * values_(i + 1, j + 1);
}

Real kernel_value(const Kernel& kernel, Real x, Real y) {
    return std::visit([&](const auto& k) { return k(x, y); }, kernel);
}

Matrix coefficient_matrix(const Kernel& kernel, const ObservationScheme& scheme) {
    if (scheme.kind() == SchemeKind::IdentityGrid)
        throw std::invalid_argument(
            "coefficient_matrix: IdentityGrid unsupported; use a fine Pointwise scheme");
    const Vector pts = scheme.coordinates();
    // Commuting kernels factor through the basis matrix; evaluating the series
    // entry by entry would cost mode_count per entry instead.
    if (const auto* ck = std::get_if<OperatorPowerKernel>(&kernel)) {
        const Matrix basis = ck->op().basis_matrix(pts);
        return basis.transpose() * ck->mode_weights().asDiagonal() * basis;
    }
    Matrix c(pts.size(), pts.size());
    for (Index i = 0; i < pts.size(); ++i)
        for (Index j = 0; j <= i; ++j) {
            c(i, j) = kernel_value(kernel, pts[i], pts[j]);
            c(j, i) = c(i, j);
        }
    return c;
}

Vector reference_eigenvalues(const Kernel& kernel, Index count) {
    const auto* ck = std::get_if<OperatorPowerKernel>(&kernel);
    if (!ck)
        throw std::invalid_argument(
            "reference_eigenvalues: closed form only for operator-power kernels");
    if (count < 0 || count > ck->op().mode_count())
        throw std::out_of_range("reference_eigenvalues: count exceeds truncation");
    Vector mu = ck->mode_weights().head(count);
    std::sort(mu.begin(), mu.end(), std::greater<Real>());
    return mu;
}

std::string kernel_label(const Kernel& kernel) {
    std::ostringstream os;
    if (const auto* m = std::get_if<MaternKernel>(&kernel)) {
        const auto& p = m->params();
        os << "matern(" << p.variance << "," << p.smoothness << "," << p.range << ")";
    } else if (const auto* c = std::get_if<OperatorPowerKernel>(&kernel)) {
        os << "commuting(nu=" << c->smoothness() << ")";
    } else {
        os << "tabulated(" << std::get<TabulatedKernel>(kernel).grid().size() << ")";
    }
    return os.str();
}

ParameterBox::ParameterBox(Vector lo, Vector up, std::vector<std::string> labels)
    : lower(std::move(lo)), upper(std::move(up)), names(std::move(labels)) {
    if (lower.size() != upper.size() || static_cast<Index>(names.size()) != lower.size())
        throw std::invalid_argument("ParameterBox: mismatched dimensions");
    if (lower.size() == 0)
        throw std::invalid_argument("ParameterBox: empty box");
    for (Index i = 0; i < lower.size(); ++i) {
        if (!(lower[i] > 0))
            throw std::invalid_argument("ParameterBox: lower bounds must be strictly positive");
        if (!(lower[i] < upper[i]))
            throw std::invalid_argument("ParameterBox: lower must be componentwise below upper");
    }
}

} // namespace spdecov
