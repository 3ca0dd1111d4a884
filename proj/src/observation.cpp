#include "spdecov/observation.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

namespace spdecov {

Subdivision::Subdivision(Vector breaks) : breaks_(std::move(breaks)) {
    if (breaks_.size() < 2)
        throw std::invalid_argument("Subdivision: need at least two breakpoints");
    if (std::abs(breaks_[0]) > 1e-12 || std::abs(breaks_[breaks_.size() - 1] - 1.0) > 1e-12)
        throw std::invalid_argument("Subdivision: breakpoints must span [0,1]");
    breaks_[0] = 0.0;
    breaks_[breaks_.size() - 1] = 1.0;
    Real wmin = std::numeric_limits<Real>::infinity(), wmax = 0;
    for (Index c = 0; c + 1 < breaks_.size(); ++c) {
        const Real w = breaks_[c + 1] - breaks_[c];
        if (!(w > 0))
            throw std::invalid_argument("Subdivision: breakpoints must be strictly increasing");
        wmin = std::min(wmin, w);
        wmax = std::max(wmax, w);
    }
    h_ = wmax;
    quasi_uniformity_ = wmax / wmin;
}

Subdivision Subdivision::uniform(Index cells) {
    if (cells < 1)
        throw std::invalid_argument("Subdivision: cell count must be >= 1");
    Vector breaks(cells + 1);
    for (Index c = 0; c <= cells; ++c)
        breaks[c] = static_cast<Real>(c) / static_cast<Real>(cells);
    return Subdivision(std::move(breaks));
}

Subdivision Subdivision::from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("Subdivision: cannot open " + path);
    std::vector<Real> vals;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        try {
            std::size_t pos = 0;
            const Real v = std::stod(line, &pos);
            vals.push_back(v);
        } catch (const std::exception&) {
            if (first) { // tolerate a single header line
                first = false;
                continue;
            }
            throw ConfigError("Subdivision: non-numeric entry in " + path);
        }
        first = false;
    }
    Vector breaks(static_cast<Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i)
        breaks[static_cast<Index>(i)] = vals[i];
    try {
        return Subdivision(std::move(breaks));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("Subdivision: ") + e.what() + " in " + path);
    }
}

Vector Subdivision::centroids() const {
    Vector out(cells());
    for (Index c = 0; c < cells(); ++c)
        out[c] = 0.5 * (breaks_[c] + breaks_[c + 1]);
    return out;
}

namespace {

Matrix build_gram(SchemeKind kind, const Subdivision& cells) {
    if (kind == SchemeKind::LocalAverage) {
        Matrix g = Matrix::Zero(cells.cells(), cells.cells());
        for (Index c = 0; c < cells.cells(); ++c)
            g(c, c) = cells.width(c);
        return g;
    }
    // Hat-function Gram assembled per cell: a cell of width w contributes
    // w/3 to both endpoint diagonals and w/6 to the coupling entry.
    const Index n = cells.cells() + 1;
    Matrix g = Matrix::Zero(n, n);
    for (Index c = 0; c < cells.cells(); ++c) {
        const Real w = cells.width(c);
        g(c, c) += w / 3.0;
        g(c + 1, c + 1) += w / 3.0;
        g(c, c + 1) += w / 6.0;
        g(c + 1, c) += w / 6.0;
    }
    return g;
}

} // namespace

ObservationScheme::ObservationScheme(SchemeKind kind, Subdivision cells)
    : kind_(kind), cells_(std::move(cells)), gram_(build_gram(kind, cells_)) {}

ObservationScheme ObservationScheme::identity_grid(Subdivision fine) {
    return ObservationScheme(SchemeKind::IdentityGrid, std::move(fine));
}

ObservationScheme ObservationScheme::local_average(Subdivision cells) {
    return ObservationScheme(SchemeKind::LocalAverage, std::move(cells));
}

ObservationScheme ObservationScheme::pointwise(Subdivision cells) {
    return ObservationScheme(SchemeKind::Pointwise, std::move(cells));
}

Vector ObservationScheme::coordinates() const {
    return kind_ == SchemeKind::LocalAverage ? cells_.centroids() : cells_.vertices();
}

Real interpolate(const ObservationScheme& scheme, const Vector& nodal, Real x) {
    if (scheme.kind() == SchemeKind::LocalAverage)
        throw std::invalid_argument("interpolate: scheme must be Pointwise or IdentityGrid");
    if (nodal.size() != scheme.dim())
        throw std::invalid_argument("interpolate: nodal size does not match scheme");
    if (!(x >= 0.0 && x <= 1.0))
        throw std::domain_error("interpolate: point outside [0,1]");
    const Vector& t = scheme.cells().breaks();
    Index c = 0;
    while (c + 2 < t.size() && x >= t[c + 1])
        ++c;
    const Real s = (x - t[c]) / (t[c + 1] - t[c]);
    return (1.0 - s) * nodal[c] + s * nodal[c + 1];
}

Vector project_average(const ObservationScheme& scheme, const Vector& fine_values,
                       const Vector& fine_grid) {
    if (scheme.kind() != SchemeKind::LocalAverage)
        throw std::invalid_argument("project_average: scheme must be LocalAverage");
    if (fine_values.size() != fine_grid.size())
        throw std::invalid_argument("project_average: values/grid size mismatch");
    const Vector& t = scheme.cells().breaks();
    Vector out(scheme.dim());
    Index lo = 0;
    for (Index c = 0; c < out.size(); ++c) {
        while (lo + 1 < fine_grid.size() && fine_grid[lo] < t[c] - 1e-12)
            ++lo;
        if (std::abs(fine_grid[lo] - t[c]) > 1e-12)
            throw ConfigError("project_average: cell boundary not on the fine grid");
        Index hi = lo;
        while (hi + 1 < fine_grid.size() && fine_grid[hi] < t[c + 1] - 1e-12)
            ++hi;
        if (std::abs(fine_grid[hi] - t[c + 1]) > 1e-12)
            throw ConfigError("project_average: cell boundary not on the fine grid");
        Real integral = 0;
        for (Index i = lo; i < hi; ++i)
            integral += 0.5 * (fine_values[i] + fine_values[i + 1]) * (fine_grid[i + 1] - fine_grid[i]);
        out[c] = integral / (t[c + 1] - t[c]);
        lo = hi;
    }
    return out;
}

} // namespace spdecov
