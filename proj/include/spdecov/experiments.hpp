#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "spdecov/gof.hpp"
#include "spdecov/sampler.hpp"

namespace spdecov {

/// Running mean/variance accumulator; merge-safe so per-worker partials can
/// be combined in any grouping (the reduction itself is run in a fixed order
/// for bitwise reproducibility).
class Welford {
public:
    void add(Real x);
    void merge(const Welford& other);
    Index count() const noexcept { return n_; }
    Real mean() const noexcept { return mean_; }
    /// Sample variance (n-1 denominator); 0 for fewer than two samples.
    Real variance() const noexcept;

private:
    Index n_ = 0;
    Real mean_ = 0;
    Real m2_ = 0;
};

/// Runs fn(0..n-1), distributing indices over the requested worker count.
/// Callers write results to per-index slots, keeping output independent of
/// the thread count. Worker exceptions are rethrown on the calling thread.
void parallel_for(Index n, int threads, const std::function<void(Index)>& fn);

enum class RateModel { CommutingSpectral, MaternFEM };

struct RateStudyConfig {
    RateModel model = RateModel::CommutingSpectral;
    SchemeKind scheme = SchemeKind::Pointwise;  // Pointwise or LocalAverage
    std::vector<Real> smoothness;               // one series per nu
    std::vector<Real> deltas;                   // dyadic, decreasing
    Real coupling_exponent = 0.5;               // h = delta^exponent
    Index replications = 100;
    std::uint64_t seed = 1;
    /// Theory slope drawn as a guide line; 0 selects the per-nu default
    /// min(nu + 1/4, 1/2).
    Real expected_rate = 0;

    Index mode_count = 512;              // spectral truncation (CommutingSpectral)
    MaternParams matern{1.0, 0.375, 0.5};  // MaternFEM truth; smoothness comes
                                           // from the smoothness list
    Real fem_sim_step = 0x1p-14;         // --paper-scale sets 2^-18
    Index fine_nodes = (1 << 9) + 1;     // reference grid for the error metric
    int threads = 1;
};

struct RateRow {
    Real nu = 0;
    Real delta = 0;
    Real h = 0;
    Real rmse = 0;
    Real stderr_value = 0;
};

struct RateSeries {
    Real nu = 0;
    Real fitted_slope = 0;
    Real expected_rate = 0;
};

struct RateStudyResult {
    std::vector<RateRow> rows;
    std::vector<RateSeries> series;
};

/// RMSE of the realized-covariation estimator against the true kernel on a
/// fine reference grid, across the (nu, delta) grid with h coupled to delta.
RateStudyResult run_rate_study(const RateStudyConfig& cfg);

/// Null hypothesis of the rejection study: a fixed kernel or a parametric
/// family searched over a box.
struct FamilyNull {
    KernelFamily family;
    ParameterBox box;
};
using NullHypothesis = std::variant<Kernel, FamilyNull>;

struct RejectionStudyConfig {
    std::vector<Kernel> truths;
    std::vector<NullHypothesis> nulls;
    Real delta = 0x1p-8;
    Real h = 0x1p-4;
    Real alpha = 0.05;
    Index replications = 2000;
    std::uint64_t seed = 1;

    Index mode_count = 512;     // spectral truth simulation
    Real fem_sim_step = 0x1p-14;  // Matern truth simulation; --paper-scale sets 2^-18
    Index fem_nodes = (1 << 6) + 1;  // --paper-scale sets 2^8 + 1
    Real fem_base_shift = 1.0;
    Real fem_diffusivity = 0.05;
    int threads = 1;
};

struct RejectionRow {
    std::string truth;
    std::string null_label;
    Real rate = 0;
    Real stderr_value = 0;
    Index replications = 0;
};

/// Rejection rate of the goodness-of-fit test for every truth/null pair;
/// diagonal entries (truth equal to null) are empirical sizes.
std::vector<RejectionRow> run_rejection_study(const RejectionStudyConfig& cfg);

struct LogLogFit {
    Real slope = 0;
    Real intercept = 0;
    Real residual = 0;  // root mean squared regression residual
};

/// Ordinary least squares of log2(value) on log2(delta).
LogLogFit fit_loglog_slope(const std::vector<std::pair<Real, Real>>& points);

enum class ReportFormat { Csv, Svg };

/// Rate study: CSV with header nu,delta,h,rmse,stderr, or a log-log SVG line
/// chart with reference-slope guide lines.
void emit_report(const RateStudyResult& result, ReportFormat format,
                 const std::string& path);
/// Rejection study: CSV with header truth,null,rate,stderr,replications, or
/// an SVG rate matrix.
void emit_report(const std::vector<RejectionRow>& rows, ReportFormat format,
                 const std::string& path);

std::vector<RateRow> read_rate_csv(const std::string& path);
std::vector<RejectionRow> read_rejection_csv(const std::string& path);

} // namespace spdecov
