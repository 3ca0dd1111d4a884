#include "spdecov/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

namespace spdecov {

void Welford::add(Real x) {
    ++n_;
    const Real delta = x - mean_;
    mean_ += delta / static_cast<Real>(n_);
    m2_ += delta * (x - mean_);
}

void Welford::merge(const Welford& other) {
    if (other.n_ == 0)
        return;
    if (n_ == 0) {
        *this = other;
        return;
    }
    const Real delta = other.mean_ - mean_;
    const Real total = static_cast<Real>(n_ + other.n_);
    m2_ += other.m2_
           + delta * delta * static_cast<Real>(n_) * static_cast<Real>(other.n_) / total;
    mean_ += delta * static_cast<Real>(other.n_) / total;
    n_ += other.n_;
}

Real Welford::variance() const noexcept {
    return n_ > 1 ? m2_ / static_cast<Real>(n_ - 1) : 0.0;
}

void parallel_for(Index n, int threads, const std::function<void(Index)>& fn) {
    if (n <= 0)
        return;
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    if (workers == 1) {
        for (Index i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<Index> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (;;) {
            const Index i = next.fetch_add(1);
            if (i >= n)
                return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back(work);
    for (auto& t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

namespace {

std::shared_ptr<const ObservationScheme> make_scheme(SchemeKind kind, Index cells) {
    switch (kind) {
    case SchemeKind::LocalAverage:
        return std::make_shared<const ObservationScheme>(
            ObservationScheme::local_average(Subdivision::uniform(cells)));
    case SchemeKind::Pointwise:
        return std::make_shared<const ObservationScheme>(
            ObservationScheme::pointwise(Subdivision::uniform(cells)));
    case SchemeKind::IdentityGrid:
        return std::make_shared<const ObservationScheme>(
            ObservationScheme::identity_grid(Subdivision::uniform(cells)));
    }
    throw ConfigError("make_scheme: unknown scheme kind");
}

// Observation matrix of a spectral mode path: modes evaluated at vertices
// (Pointwise) or averaged exactly over cells (LocalAverage).
Matrix spectral_observation_map(const SpectralOperator& op, const ObservationScheme& scheme) {
    if (scheme.kind() == SchemeKind::LocalAverage)
        return op.basis_cell_averages(scheme.cells().breaks());
    return op.basis_matrix(scheme.coordinates());
}

PathObservations simulate_commuting_obs(const OperatorPowerKernel& kernel, Real delta,
                                        std::shared_ptr<const ObservationScheme> scheme,
                                        const Matrix& observation_map,
                                        std::uint64_t rep_seed) {
    SimulationConfig sim(1.0, delta, Vector(), rep_seed);
    auto paths = simulate_spectral(kernel.op(), kernel.mode_weights(), sim, 1);
    return PathObservations(paths[0].values * observation_map, delta, 1.0,
                            std::move(scheme));
}

Index cells_from_width(Real h) {
    const Index cells = static_cast<Index>(std::llround(1.0 / h));
    if (cells < 1 || std::abs(1.0 / h - static_cast<Real>(cells)) > 1e-9 * (1.0 / h))
        throw ConfigError("spatial resolution must subdivide (0,1) evenly");
    return cells;
}

Real default_expected_rate(Real nu) { return std::min(nu + 0.25, 0.5); }

} // namespace

RateStudyResult run_rate_study(const RateStudyConfig& cfg) {
    if (cfg.smoothness.empty() || cfg.deltas.empty())
        throw ConfigError("run_rate_study: smoothness and delta lists must be nonempty");
    if (cfg.replications < 2)
        throw ConfigError("run_rate_study: need at least two replications");
    for (std::size_t i = 0; i + 1 < cfg.deltas.size(); ++i)
        if (!(cfg.deltas[i] > cfg.deltas[i + 1]))
            throw ConfigError("run_rate_study: deltas must be decreasing");
    if (cfg.scheme == SchemeKind::IdentityGrid)
        throw ConfigError("run_rate_study: use Pointwise for full-resolution sampling");

    const auto fine_scheme = make_scheme(SchemeKind::Pointwise, cfg.fine_nodes - 1);
    const Matrix& fine_gram = fine_scheme->gram();
    const Vector fine_points = fine_scheme->coordinates();

    RateStudyResult result;
    std::uint64_t cell_index = 0;
    for (const Real nu : cfg.smoothness) {
        // Reference truth on the fine grid, shared across deltas.
        std::shared_ptr<const SpectralOperator> op;
        std::unique_ptr<Kernel> truth;
        if (cfg.model == RateModel::CommutingSpectral) {
            op = std::make_shared<const SpectralOperator>(Boundary::Dirichlet, 0.0, 1.0,
                                                          cfg.mode_count);
            truth = std::make_unique<Kernel>(OperatorPowerKernel(op, nu));
        } else {
            truth = std::make_unique<Kernel>(
                MaternKernel({cfg.matern.variance, nu, cfg.matern.range}));
        }
        const Matrix c_ref = coefficient_matrix(*truth, *fine_scheme);

        std::vector<std::pair<Real, Real>> fit_points;
        for (const Real delta : cfg.deltas) {
            const Real h = std::pow(delta, cfg.coupling_exponent);
            const auto scheme = make_scheme(cfg.scheme, cells_from_width(h));
            const Matrix prolong = prolongation_matrix(*scheme, fine_points);
            std::vector<Real> sq_errors(static_cast<std::size_t>(cfg.replications));
            auto record_error = [&](Index r, const RealizedCovariation& rv) {
                const Matrix c_fine = prolong * rv.c * prolong.transpose();
                sq_errors[static_cast<std::size_t>(r)] =
                    hs_distance_sq(c_fine, c_ref, fine_gram);
            };

            if (cfg.model == RateModel::CommutingSpectral) {
                const auto& kernel = std::get<OperatorPowerKernel>(*truth);
                const Matrix obs_map = spectral_observation_map(*op, *scheme);
                parallel_for(cfg.replications, cfg.threads, [&](Index r) {
                    const auto obs = simulate_commuting_obs(
                        kernel, delta, scheme, obs_map,
                        derive_seed(cfg.seed, cell_index, static_cast<std::uint64_t>(r)));
                    record_error(r, realized_covariation(obs));
                });
            } else {
                const Index fem_cells = cells_from_width(h);
                const Vector grid = Subdivision::uniform(fem_cells).breaks();
                const Real sim_step = std::min(cfg.fem_sim_step, delta);
                const SpectralOperator fem_op(Boundary::Neumann, 1.0, 0.05, 1);
                const MaternParams params{cfg.matern.variance, nu, cfg.matern.range};
                parallel_for(cfg.replications, cfg.threads, [&](Index r) {
                    SimulationConfig sim(1.0, sim_step, grid,
                                         derive_seed(cfg.seed, cell_index,
                                                     static_cast<std::uint64_t>(r)));
                    const PathLattice path = simulate_fem(fem_op, params, sim);
                    record_error(r, realized_covariation(subsample(path, delta, scheme)));
                });
            }

            Welford acc;
            for (const Real e2 : sq_errors)
                acc.add(e2);
            const Real rmse = std::sqrt(acc.mean());
            // Delta-method standard error of the RMSE from the spread of the
            // squared errors.
            const Real se = std::sqrt(acc.variance() / static_cast<Real>(acc.count()))
                            / (2.0 * rmse);
            result.rows.push_back({nu, delta, h, rmse, se});
            fit_points.emplace_back(delta, rmse);
            ++cell_index;
        }
        const LogLogFit fit = fit_loglog_slope(fit_points);
        const Real expected = cfg.expected_rate > 0 ? cfg.expected_rate
                                                    : default_expected_rate(nu);
        result.series.push_back({nu, fit.slope, expected});
    }
    return result;
}

namespace {

std::string null_label(const NullHypothesis& null) {
    if (const auto* kernel = std::get_if<Kernel>(&null))
        return kernel_label(*kernel);
    return std::get<FamilyNull>(null).family.name() + "-family";
}

} // namespace

std::vector<RejectionRow> run_rejection_study(const RejectionStudyConfig& cfg) {
    if (cfg.truths.empty() || cfg.nulls.empty())
        throw ConfigError("run_rejection_study: truths and nulls must be nonempty");
    if (!(cfg.alpha > 0) || !(cfg.alpha < 1))
        throw ConfigError("run_rejection_study: alpha must lie in (0,1)");
    if (cfg.replications < 1)
        throw ConfigError("run_rejection_study: need at least one replication");

    const auto scheme = make_scheme(SchemeKind::Pointwise, cells_from_width(cfg.h));
    const Matrix& gram = scheme->gram();
    const Index n_nulls = static_cast<Index>(cfg.nulls.size());

    // Fixed-kernel nulls are calibrated once: rejection at level alpha is
    // equivalent to the statistic exceeding the null law's 1-alpha quantile.
    std::vector<Matrix> null_c0(cfg.nulls.size());
    std::vector<Real> null_threshold(cfg.nulls.size(), 0.0);
    for (std::size_t n = 0; n < cfg.nulls.size(); ++n) {
        if (const auto* kernel = std::get_if<Kernel>(&cfg.nulls[n])) {
            null_c0[n] = coefficient_matrix(*kernel, *scheme);
            const Vector mu = null_eigenvalues(gram, null_c0[n],
                                               std::min<Index>(scheme->dim(), 100));
            const WeightedChiSquare dist(gamma_weights(mu), mu.size());
            null_threshold[n] = quantile(dist, 1.0 - cfg.alpha);
        }
    }

    std::vector<RejectionRow> rows;
    for (std::size_t t = 0; t < cfg.truths.size(); ++t) {
        const Kernel& truth = cfg.truths[t];
        const auto* commuting = std::get_if<OperatorPowerKernel>(&truth);
        const auto* matern = std::get_if<MaternKernel>(&truth);
        if (!commuting && !matern)
            throw ConfigError("run_rejection_study: truth kernels must be matern or commuting");

        Matrix obs_map;
        if (commuting)
            obs_map = spectral_observation_map(commuting->op(), *scheme);
        const Vector fem_grid = Subdivision::uniform(cfg.fem_nodes - 1).breaks();
        const SpectralOperator fem_op(Boundary::Neumann, cfg.fem_base_shift,
                                      cfg.fem_diffusivity, 1);

        std::vector<std::uint8_t> rejected(
            static_cast<std::size_t>(cfg.replications * n_nulls), 0);
        parallel_for(cfg.replications, cfg.threads, [&](Index r) {
            const std::uint64_t rep_seed =
                derive_seed(cfg.seed, static_cast<std::uint64_t>(t),
                            static_cast<std::uint64_t>(r));
            PathObservations obs = [&] {
                if (commuting)
                    return simulate_commuting_obs(*commuting, cfg.delta, scheme, obs_map,
                                                  rep_seed);
                SimulationConfig sim(1.0, std::min(cfg.fem_sim_step, cfg.delta), fem_grid,
                                     rep_seed);
                return subsample(simulate_fem(fem_op, matern->params(), sim), cfg.delta,
                                 scheme);
            }();
            const auto rv = realized_covariation(obs);
            const Matrix estimate = rv.c * (rv.horizon / rv.t_delta);
            for (Index n = 0; n < n_nulls; ++n) {
                bool reject;
                if (std::holds_alternative<Kernel>(cfg.nulls[static_cast<std::size_t>(n)])) {
                    const Real stat =
                        hs_distance_sq(estimate, null_c0[static_cast<std::size_t>(n)], gram)
                        / cfg.delta;
                    reject = stat > null_threshold[static_cast<std::size_t>(n)];
                } else {
                    const auto& fam = std::get<FamilyNull>(cfg.nulls[static_cast<std::size_t>(n)]);
                    reject = test_parametric(obs, fam.family, fam.box, cfg.alpha).reject;
                }
                rejected[static_cast<std::size_t>(r * n_nulls + n)] = reject ? 1 : 0;
            }
        });

        for (Index n = 0; n < n_nulls; ++n) {
            Index hits = 0;
            for (Index r = 0; r < cfg.replications; ++r)
                hits += rejected[static_cast<std::size_t>(r * n_nulls + n)];
            const Real rate = static_cast<Real>(hits) / static_cast<Real>(cfg.replications);
            const Real se = std::sqrt(rate * (1.0 - rate)
                                      / static_cast<Real>(cfg.replications));
            rows.push_back({kernel_label(truth),
                            null_label(cfg.nulls[static_cast<std::size_t>(n)]), rate, se,
                            cfg.replications});
        }
    }
    return rows;
}

LogLogFit fit_loglog_slope(const std::vector<std::pair<Real, Real>>& points) {
    std::vector<Real> xs, ys;
    for (const auto& [delta, value] : points) {
        if (!(delta > 0) || !(value > 0))
            throw std::domain_error("fit_loglog_slope: nonpositive delta or value");
        xs.push_back(std::log2(delta));
        ys.push_back(std::log2(value));
    }
    const std::size_t n = xs.size();
    std::size_t distinct = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (std::find(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(i), xs[i])
            == xs.begin() + static_cast<std::ptrdiff_t>(i))
            ++distinct;
    if (distinct < 2)
        throw std::invalid_argument("fit_loglog_slope: need at least two distinct deltas");

    Real mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<Real>(n);
    my /= static_cast<Real>(n);
    Real sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    LogLogFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    Real ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Real r = ys[i] - (fit.intercept + fit.slope * xs[i]);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / static_cast<Real>(n));
    return fit;
}

namespace {

std::string format_real(Real v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

// Kernel labels carry commas (matern(1,0.375,0.5)), so label cells are quoted
// per the usual CSV convention when needed.
std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out)
        throw ConfigError("emit_report: cannot open " + path + " for writing");
    out << content;
    if (!out)
        throw ConfigError("emit_report: write failed for " + path);
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

// Shared frame for the SVG charts.
constexpr Real kSvgWidth = 720;
constexpr Real kSvgHeight = 480;
constexpr Real kMarginLeft = 70;
constexpr Real kMarginRight = 30;
constexpr Real kMarginTop = 30;
constexpr Real kMarginBottom = 60;

const char* series_color(std::size_t i) {
    static const char* palette[] = {"#1f6fb2", "#c23b22", "#2e8540", "#8a4fbf",
                                    "#b8860b", "#0f8b8d"};
    return palette[i % (sizeof(palette) / sizeof(palette[0]))];
}

std::string rate_svg(const RateStudyResult& result) {
    Real min_x = 0, max_x = 0, min_y = 0, max_y = 0;
    bool first = true;
    for (const auto& row : result.rows) {
        const Real x = std::log2(row.delta);
        const Real y = std::log2(row.rmse);
        if (first) {
            min_x = max_x = x;
            min_y = max_y = y;
            first = false;
        }
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
    }
    if (first)
        throw std::invalid_argument("emit_report: no rows");
    if (max_x == min_x) {
        max_x += 1;
        min_x -= 1;
    }
    min_y -= 0.5;
    max_y += 0.5;
    const Real plot_w = kSvgWidth - kMarginLeft - kMarginRight;
    const Real plot_h = kSvgHeight - kMarginTop - kMarginBottom;
    auto px = [&](Real x) { return kMarginLeft + (x - min_x) / (max_x - min_x) * plot_w; };
    auto py = [&](Real y) { return kMarginTop + (max_y - y) / (max_y - min_y) * plot_h; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSvgWidth
        << "\" height=\"" << kSvgHeight << "\" viewBox=\"0 0 " << kSvgWidth << " "
        << kSvgHeight << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<g font-family=\"sans-serif\" font-size=\"12\">\n";

    // axes
    svg << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop + plot_h << "\" x2=\""
        << kMarginLeft + plot_w << "\" y2=\"" << kMarginTop + plot_h
        << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop << "\" x2=\""
        << kMarginLeft << "\" y2=\"" << kMarginTop + plot_h << "\" stroke=\"black\"/>\n";
    for (int e = static_cast<int>(std::ceil(min_x)); e <= static_cast<int>(std::floor(max_x));
         ++e) {
        svg << "<text x=\"" << px(e) << "\" y=\"" << kMarginTop + plot_h + 18
            << "\" text-anchor=\"middle\">2^" << e << "</text>\n";
    }
    svg << "<text x=\"" << kMarginLeft + plot_w / 2 << "\" y=\"" << kSvgHeight - 15
        << "\" text-anchor=\"middle\">observation step</text>\n";
    for (int e = static_cast<int>(std::ceil(min_y)); e <= static_cast<int>(std::floor(max_y));
         ++e) {
        svg << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << py(e) + 4
            << "\" text-anchor=\"end\">2^" << e << "</text>\n";
    }
    svg << "<text x=\"18\" y=\"" << kMarginTop + plot_h / 2
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << kMarginTop + plot_h / 2 << ")\">rmse</text>\n";

    for (std::size_t s = 0; s < result.series.size(); ++s) {
        const RateSeries& series = result.series[s];
        std::ostringstream pts;
        Real anchor_x = 0, anchor_y = 0;
        bool have_anchor = false;
        for (const auto& row : result.rows) {
            if (row.nu != series.nu)
                continue;
            const Real x = std::log2(row.delta);
            const Real y = std::log2(row.rmse);
            pts << px(x) << "," << py(y) << " ";
            if (!have_anchor || x > anchor_x) {
                anchor_x = x;
                anchor_y = y;
                have_anchor = true;
            }
        }
        svg << "<polyline fill=\"none\" stroke=\"" << series_color(s)
            << "\" stroke-width=\"2\" points=\"" << pts.str() << "\"/>\n";
        // guide line with the theoretical slope, anchored at the coarsest point
        if (have_anchor) {
            const Real x0 = min_x;
            const Real x1 = anchor_x;
            const Real y0 = anchor_y + series.expected_rate * (x0 - anchor_x) - 0.15;
            const Real y1 = anchor_y - 0.15;
            svg << "<line x1=\"" << px(x0) << "\" y1=\"" << py(y0) << "\" x2=\"" << px(x1)
                << "\" y2=\"" << py(y1) << "\" stroke=\"" << series_color(s)
                << "\" stroke-dasharray=\"5,4\" stroke-width=\"1\"/>\n";
        }
        svg << "<text x=\"" << kMarginLeft + plot_w - 4 << "\" y=\""
            << kMarginTop + 16 * static_cast<Real>(s + 1)
            << "\" text-anchor=\"end\" fill=\"" << series_color(s) << "\">nu="
            << series.nu << " slope=" << std::setprecision(3) << series.fitted_slope
            << std::setprecision(6) << " (guide " << series.expected_rate << ")</text>\n";
    }
    svg << "</g>\n</svg>\n";
    return svg.str();
}

std::string rejection_svg(const std::vector<RejectionRow>& rows) {
    std::vector<std::string> truths, nulls;
    for (const auto& row : rows) {
        if (std::find(truths.begin(), truths.end(), row.truth) == truths.end())
            truths.push_back(row.truth);
        if (std::find(nulls.begin(), nulls.end(), row.null_label) == nulls.end())
            nulls.push_back(row.null_label);
    }
    const Real cell_w = 110, cell_h = 42, left = 180, top = 90;
    const Real width = left + cell_w * static_cast<Real>(nulls.size()) + 20;
    const Real height = top + cell_h * static_cast<Real>(truths.size()) + 20;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
    svg << "<text x=\"" << left << "\" y=\"20\" font-size=\"13\">rejection rate "
           "(rows: truth, columns: null)</text>\n";
    for (std::size_t n = 0; n < nulls.size(); ++n)
        svg << "<text x=\"" << left + cell_w * (static_cast<Real>(n) + 0.5) << "\" y=\""
            << top - 10 << "\" text-anchor=\"middle\">" << xml_escape(nulls[n])
            << "</text>\n";
    for (std::size_t t = 0; t < truths.size(); ++t)
        svg << "<text x=\"" << left - 8 << "\" y=\""
            << top + cell_h * (static_cast<Real>(t) + 0.6)
            << "\" text-anchor=\"end\">" << xml_escape(truths[t]) << "</text>\n";
    for (const auto& row : rows) {
        const auto t = static_cast<Real>(
            std::find(truths.begin(), truths.end(), row.truth) - truths.begin());
        const auto n = static_cast<Real>(
            std::find(nulls.begin(), nulls.end(), row.null_label) - nulls.begin());
        const int shade = static_cast<int>(255.0 * (1.0 - row.rate));
        svg << "<rect x=\"" << left + cell_w * n << "\" y=\"" << top + cell_h * t
            << "\" width=\"" << cell_w << "\" height=\"" << cell_h << "\" fill=\"rgb(255,"
            << shade << "," << shade << ")\" stroke=\"#888\"/>\n";
        svg << "<text x=\"" << left + cell_w * (n + 0.5) << "\" y=\""
            << top + cell_h * (t + 0.6) << "\" text-anchor=\"middle\">" << std::fixed
            << std::setprecision(3) << row.rate << std::defaultfloat
            << std::setprecision(6) << "</text>\n";
    }
    svg << "</g>\n</svg>\n";
    return svg.str();
}

} // namespace

void emit_report(const RateStudyResult& result, ReportFormat format,
                 const std::string& path) {
    if (result.rows.empty())
        throw std::invalid_argument("emit_report: no rows");
    if (format == ReportFormat::Csv) {
        std::ostringstream csv;
        csv << "nu,delta,h,rmse,stderr\n";
        for (const auto& row : result.rows)
            csv << format_real(row.nu) << "," << format_real(row.delta) << ","
                << format_real(row.h) << "," << format_real(row.rmse) << ","
                << format_real(row.stderr_value) << "\n";
        write_file(path, csv.str());
    } else {
        write_file(path, rate_svg(result));
    }
}

void emit_report(const std::vector<RejectionRow>& rows, ReportFormat format,
                 const std::string& path) {
    if (rows.empty())
        throw std::invalid_argument("emit_report: no rows");
    if (format == ReportFormat::Csv) {
        std::ostringstream csv;
        csv << "truth,null,rate,stderr,replications\n";
        for (const auto& row : rows)
            csv << csv_field(row.truth) << "," << csv_field(row.null_label) << ","
                << format_real(row.rate) << "," << format_real(row.stderr_value) << ","
                << row.replications << "\n";
        write_file(path, csv.str());
    } else {
        write_file(path, rejection_svg(rows));
    }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
        } else if (c == '"' && cell.empty()) {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cell);
            cell.clear();
        } else {
            cell += c;
        }
    }
    out.push_back(cell);
    return out;
}

} // namespace

std::vector<RateRow> read_rate_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("read_rate_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "nu,delta,h,rmse,stderr")
        throw ConfigError("read_rate_csv: bad header in " + path);
    std::vector<RateRow> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const auto cells = split_line(line);
        if (cells.size() != 5)
            throw ConfigError("read_rate_csv: ragged row in " + path);
        try {
            rows.push_back({std::stod(cells[0]), std::stod(cells[1]), std::stod(cells[2]),
                            std::stod(cells[3]), std::stod(cells[4])});
        } catch (const std::exception&) {
            throw ConfigError("read_rate_csv: non-numeric value in " + path);
        }
    }
    return rows;
}

std::vector<RejectionRow> read_rejection_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("read_rejection_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "truth,null,rate,stderr,replications")
        throw ConfigError("read_rejection_csv: bad header in " + path);
    std::vector<RejectionRow> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const auto cells = split_line(line);
        if (cells.size() != 5)
            throw ConfigError("read_rejection_csv: ragged row in " + path);
        try {
            rows.push_back({cells[0], cells[1], std::stod(cells[2]), std::stod(cells[3]),
                            static_cast<Index>(std::stoll(cells[4]))});
        } catch (const std::exception&) {
            throw ConfigError("read_rejection_csv: non-numeric value in " + path);
        }
    }
    return rows;
}

} // namespace spdecov
