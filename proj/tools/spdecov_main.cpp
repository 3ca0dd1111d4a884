// Command line front end: simulation, estimation, the two goodness-of-fit
// tests, and the rate / rejection Monte Carlo studies. Configuration comes
// from a JSON file (--config); a handful of flags override the common knobs.
// Exit codes: 0 success, 2 configuration problem, 3 numerical failure.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spdecov/experiments.hpp"

using nlohmann::json;
using namespace spdecov;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    int threads = 1;
    bool full = false;
    bool paper_scale = false;
    bool dump_paths = false;
};

json load_config(const std::string& path) {
    if (path.empty())
        return json::object();
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path);
    return json::parse(in);
}

std::string out_file(const CommonOpts& opts, const std::string& name) {
    std::error_code ec;
    std::filesystem::create_directories(opts.out_dir, ec);
    if (ec)
        throw ConfigError("cannot create output directory " + opts.out_dir);
    return (std::filesystem::path(opts.out_dir) / name).string();
}

std::string format_real(Real v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

Vector to_vector(const json& j) {
    if (!j.is_array())
        throw ConfigError("expected a numeric array");
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v[static_cast<Index>(i)] = j[i].get<Real>();
    return v;
}

// Step sizes accept either a plain value ("delta": 0.00390625) or a dyadic
// exponent ("delta_log2": -8).
Real step_from(const json& j, const std::string& key, Real fallback = 0) {
    if (j.contains(key))
        return j.at(key).get<Real>();
    if (j.contains(key + "_log2"))
        return std::ldexp(1.0, j.at(key + "_log2").get<int>());
    if (fallback > 0)
        return fallback;
    throw ConfigError("config: missing " + key);
}

Boundary parse_boundary(const std::string& name) {
    if (name == "dirichlet")
        return Boundary::Dirichlet;
    if (name == "neumann")
        return Boundary::Neumann;
    throw ConfigError("unknown boundary: " + name);
}

std::shared_ptr<const SpectralOperator> parse_operator(const json& j, Index default_modes) {
    const Boundary boundary = parse_boundary(j.value("boundary", std::string("dirichlet")));
    const Real shift = j.value("base_shift", 0.0);
    const Real diffusivity = j.value("diffusivity", 1.0);
    const Index modes = j.value("mode_count", default_modes);
    return std::make_shared<const SpectralOperator>(boundary, shift, diffusivity, modes);
}

Kernel parse_kernel(const json& j, Index default_modes) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "matern") {
        return MaternKernel({j.value("variance", 1.0), j.at("smoothness").get<Real>(),
                             j.value("range", 0.5)});
    }
    if (type == "commuting")
        return OperatorPowerKernel(parse_operator(j, default_modes),
                                   j.at("smoothness").get<Real>());
    if (type == "tabulated")
        return TabulatedKernel::from_csv(j.at("path").get<std::string>());
    throw ConfigError("unknown kernel type: " + type);
}

std::shared_ptr<const ObservationScheme> parse_scheme(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    Subdivision cells = j.contains("breaks_csv")
                            ? Subdivision::from_csv(j.at("breaks_csv").get<std::string>())
                            : Subdivision::uniform(j.at("cells").get<Index>());
    if (kind == "pointwise")
        return std::make_shared<const ObservationScheme>(
            ObservationScheme::pointwise(std::move(cells)));
    if (kind == "local_average")
        return std::make_shared<const ObservationScheme>(
            ObservationScheme::local_average(std::move(cells)));
    if (kind == "identity")
        return std::make_shared<const ObservationScheme>(
            ObservationScheme::identity_grid(std::move(cells)));
    throw ConfigError("unknown scheme kind: " + kind);
}

KernelFamily parse_family(const json& j, Index default_modes) {
    const std::string name = j.is_string() ? j.get<std::string>()
                                           : j.at("name").get<std::string>();
    if (name == "matern")
        return KernelFamily::matern();
    if (name == "commuting")
        return KernelFamily::operator_power(
            parse_operator(j.is_object() ? j : json::object(), default_modes));
    throw ConfigError("unknown kernel family: " + name);
}

ParameterBox parse_box(const json& j, const KernelFamily& family) {
    const Vector lower = to_vector(j.at("lower"));
    const Vector upper = to_vector(j.at("upper"));
    std::vector<std::string> names;
    if (j.contains("names")) {
        for (const auto& n : j.at("names"))
            names.push_back(n.get<std::string>());
    } else if (family.name() == "matern") {
        names = {"variance", "smoothness", "range"};
    } else {
        names = {"smoothness"};
    }
    return ParameterBox(lower, upper, std::move(names));
}

Matrix read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open " + path);
    std::vector<std::vector<Real>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<Real> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError(path + ": non-numeric entry '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ConfigError(path + ": ragged rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw ConfigError(path + ": no data");
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 0; k < rows[i].size(); ++k)
            m(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
    return m;
}

void write_matrix_csv(const std::string& path, const Matrix& m) {
    std::ofstream out(path);
    if (!out)
        throw ConfigError("cannot open " + path + " for writing");
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j)
            out << (j ? "," : "") << format_real(m(i, j));
        out << "\n";
    }
}

void dump_path_csv(const std::string& path, const PathLattice& lattice) {
    std::ofstream out(path);
    if (!out)
        throw ConfigError("cannot open " + path + " for writing");
    out << "step,node,value\n";
    for (Index i = 0; i < lattice.values.rows(); ++i)
        for (Index j = 0; j < lattice.values.cols(); ++j)
            out << i << "," << j << "," << format_real(lattice.values(i, j)) << "\n";
}

PathObservations load_observations(const json& cfg) {
    Matrix values = read_matrix_csv(cfg.at("observations_csv").get<std::string>());
    const Real delta = step_from(cfg, "delta");
    const Real horizon =
        cfg.contains("horizon") ? cfg.at("horizon").get<Real>()
                                : delta * static_cast<Real>(values.rows() - 1);
    return PathObservations(std::move(values), delta, horizon,
                            parse_scheme(cfg.at("scheme")));
}

TestOptions parse_test_options(const json& cfg) {
    TestOptions opts;
    opts.max_eigenvalues = cfg.value("max_eigenvalues", opts.max_eigenvalues);
    opts.eigen_floor = cfg.value("eigen_floor", opts.eigen_floor);
    return opts;
}

std::uint64_t pick_seed(const json& cfg, const CommonOpts& opts) {
    if (opts.seed)
        return *opts.seed;
    return cfg.value("seed", std::uint64_t{1});
}

int run_simulate(const json& cfg, const CommonOpts& opts) {
    const std::string model = cfg.value("model", std::string("spectral"));
    const Real horizon = cfg.value("horizon", 1.0);
    const Real sim_step = step_from(cfg, "sim_step");
    const Index n_paths = cfg.value("paths", Index{1});
    const std::uint64_t seed = pick_seed(cfg, opts);
    Vector init;
    if (cfg.contains("initial_condition"))
        init = to_vector(cfg.at("initial_condition"));

    std::vector<PathLattice> paths;
    std::string representation;
    if (model == "spectral") {
        const Kernel kernel = parse_kernel(cfg.at("kernel"), 512);
        const auto* ck = std::get_if<OperatorPowerKernel>(&kernel);
        if (!ck)
            throw ConfigError("simulate: the spectral model takes a commuting kernel");
        SimulationConfig sim(horizon, sim_step, Vector(), seed, init);
        paths = simulate_spectral(ck->op(), ck->mode_weights(), sim, n_paths);
        representation = "modes";
        if (cfg.contains("grid_nodes")) {
            const Index nodes = cfg.at("grid_nodes").get<Index>();
            const Vector grid = Subdivision::uniform(nodes - 1).breaks();
            for (auto& p : paths)
                p = modes_to_grid(p, ck->op(), grid);
            representation = "nodal";
        }
    } else if (model == "fem") {
        const Kernel kernel = parse_kernel(cfg.at("kernel"), 512);
        const auto* mk = std::get_if<MaternKernel>(&kernel);
        if (!mk)
            throw ConfigError("simulate: the fem model takes a matern kernel");
        const Index nodes = cfg.value("grid_nodes", Index{65});
        const Vector grid = Subdivision::uniform(nodes - 1).breaks();
        const SpectralOperator op(Boundary::Neumann, cfg.value("base_shift", 1.0),
                                  cfg.value("diffusivity", 0.05), 1);
        for (Index p = 0; p < n_paths; ++p) {
            SimulationConfig sim(horizon, sim_step, grid,
                                 derive_seed(seed, static_cast<std::uint64_t>(p)), init);
            paths.push_back(simulate_fem(op, mk->params(), sim));
        }
        representation = "nodal";
    } else {
        throw ConfigError("simulate: unknown model " + model);
    }

    json summary{{"model", model},
                 {"paths", paths.size()},
                 {"steps", paths.front().values.rows() - 1},
                 {"columns", paths.front().values.cols()},
                 {"representation", representation}};
    if (opts.dump_paths) {
        std::vector<std::string> files;
        for (std::size_t p = 0; p < paths.size(); ++p) {
            const std::string file =
                out_file(opts, "path_" + std::to_string(p) + ".csv");
            dump_path_csv(file, paths[p]);
            files.push_back(file);
        }
        summary["files"] = files;
    }
    std::cout << summary.dump() << "\n";
    return 0;
}

int run_estimate(const json& cfg, const CommonOpts& opts) {
    const PathObservations obs = load_observations(cfg);
    const RealizedCovariation rv = realized_covariation(obs);
    const std::string file = out_file(opts, "rv.csv");
    write_matrix_csv(file, rv.c);
    json summary{{"dimension", rv.c.rows()},
                 {"delta", rv.delta},
                 {"horizon", rv.horizon},
                 {"t_delta", rv.t_delta},
                 {"file", file}};
    std::cout << summary.dump() << "\n";
    return 0;
}

int run_test_fixed(const json& cfg, const CommonOpts& opts) {
    const PathObservations obs = load_observations(cfg);
    const Kernel null_kernel = parse_kernel(cfg.at("null"), 512);
    const Real alpha = cfg.value("alpha", 0.05);
    const TestReport report = test_fixed(obs, null_kernel, alpha, parse_test_options(cfg));
    std::ofstream(out_file(opts, "report.json")) << report.to_json() << "\n";
    std::cout << report.to_json() << "\n";
    return 0;
}

int run_test_parametric(const json& cfg, const CommonOpts& opts) {
    const PathObservations obs = load_observations(cfg);
    const KernelFamily family = parse_family(cfg.at("family"), 512);
    const ParameterBox box = parse_box(cfg.at("box"), family);
    const Real alpha = cfg.value("alpha", 0.05);
    const std::uint64_t scan_seed = cfg.value("scan_seed", std::uint64_t{0x5eed});
    const TestReport report =
        test_parametric(obs, family, box, alpha, parse_test_options(cfg), scan_seed);
    std::ofstream(out_file(opts, "report.json")) << report.to_json() << "\n";
    std::cout << report.to_json() << "\n";
    return 0;
}

int run_rate_study(const json& cfg, const CommonOpts& opts) {
    RateStudyConfig study;
    const std::string model = cfg.value("model", std::string("commuting"));
    if (model == "commuting")
        study.model = RateModel::CommutingSpectral;
    else if (model == "matern_fem")
        study.model = RateModel::MaternFEM;
    else
        throw ConfigError("rate-study: unknown model " + model);
    const std::string scheme = cfg.value("scheme", std::string("pointwise"));
    if (scheme == "pointwise")
        study.scheme = SchemeKind::Pointwise;
    else if (scheme == "local_average")
        study.scheme = SchemeKind::LocalAverage;
    else
        throw ConfigError("rate-study: unknown scheme " + scheme);

    study.smoothness = {0.125, 0.25, 0.375, 0.5, 0.75};
    if (cfg.contains("smoothness"))
        study.smoothness = cfg.at("smoothness").get<std::vector<Real>>();
    if (cfg.contains("deltas")) {
        study.deltas = cfg.at("deltas").get<std::vector<Real>>();
    } else {
        std::vector<int> exps = {-4, -6, -8, -10, -12};
        if (cfg.contains("deltas_log2"))
            exps = cfg.at("deltas_log2").get<std::vector<int>>();
        study.deltas.clear();
        for (const int e : exps)
            study.deltas.push_back(std::ldexp(1.0, e));
    }
    study.coupling_exponent = cfg.value("coupling_exponent", study.coupling_exponent);
    study.replications = cfg.value("replications", Index{opts.full ? 120 : 100});
    study.seed = pick_seed(cfg, opts);
    study.expected_rate = cfg.value("expected_rate", 0.0);
    study.mode_count = cfg.value("mode_count", study.mode_count);
    if (cfg.contains("matern")) {
        const json& m = cfg.at("matern");
        study.matern = {m.value("variance", 1.0), m.value("smoothness", 0.375),
                        m.value("range", 0.5)};
    }
    study.fem_sim_step = std::ldexp(
        1.0, cfg.value("fem_sim_step_log2", opts.paper_scale ? -18 : -14));
    study.fine_nodes = cfg.value("fine_nodes", study.fine_nodes);
    study.threads = opts.threads;

    const RateStudyResult result = run_rate_study(study);
    const std::string csv = out_file(opts, "rate.csv");
    const std::string svg = out_file(opts, "rate.svg");
    emit_report(result, ReportFormat::Csv, csv);
    emit_report(result, ReportFormat::Svg, svg);

    json series = json::array();
    for (const auto& s : result.series)
        series.push_back({{"nu", s.nu},
                          {"fitted_slope", s.fitted_slope},
                          {"expected_rate", s.expected_rate}});
    json summary{{"rows", result.rows.size()},
                 {"replications", study.replications},
                 {"series", series},
                 {"csv", csv},
                 {"svg", svg}};
    std::cout << summary.dump() << "\n";
    return 0;
}

int run_rejection_study(const json& cfg, const CommonOpts& opts) {
    RejectionStudyConfig study;
    study.mode_count = cfg.value("mode_count", study.mode_count);

    if (cfg.contains("truths")) {
        for (const auto& k : cfg.at("truths"))
            study.truths.push_back(parse_kernel(k, study.mode_count));
    } else {
        study.truths.push_back(OperatorPowerKernel(
            std::make_shared<const SpectralOperator>(Boundary::Dirichlet, 0.0, 1.0,
                                                     study.mode_count),
            0.5));
        study.truths.push_back(MaternKernel({1.0, 0.375, 0.5}));
    }
    if (cfg.contains("nulls")) {
        for (const auto& n : cfg.at("nulls")) {
            if (n.contains("family")) {
                const KernelFamily family = parse_family(n.at("family"), study.mode_count);
                study.nulls.push_back(FamilyNull{family, parse_box(n.at("box"), family)});
            } else {
                study.nulls.push_back(parse_kernel(n, study.mode_count));
            }
        }
    } else {
        for (const auto& truth : study.truths)
            study.nulls.push_back(truth);
    }

    study.delta = step_from(cfg, "delta", study.delta);
    study.h = step_from(cfg, "h", study.h);
    study.alpha = cfg.value("alpha", study.alpha);
    study.replications = cfg.value("replications", Index{opts.full ? 10000 : 2000});
    study.seed = pick_seed(cfg, opts);
    study.fem_sim_step = std::ldexp(
        1.0, cfg.value("fem_sim_step_log2", opts.paper_scale ? -18 : -14));
    study.fem_nodes = cfg.value("fem_nodes", Index{opts.paper_scale ? 257 : 65});
    study.fem_base_shift = cfg.value("fem_base_shift", study.fem_base_shift);
    study.fem_diffusivity = cfg.value("fem_diffusivity", study.fem_diffusivity);
    study.threads = opts.threads;

    const std::vector<RejectionRow> rows = run_rejection_study(study);
    const std::string csv = out_file(opts, "rejection.csv");
    const std::string svg = out_file(opts, "rejection.svg");
    emit_report(rows, ReportFormat::Csv, csv);
    emit_report(rows, ReportFormat::Svg, svg);

    json table = json::array();
    for (const auto& row : rows)
        table.push_back({{"truth", row.truth},
                         {"null", row.null_label},
                         {"rate", row.rate},
                         {"stderr", row.stderr_value}});
    json summary{{"replications", study.replications},
                 {"alpha", study.alpha},
                 {"rates", table},
                 {"csv", csv},
                 {"svg", svg}};
    std::cout << summary.dump() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Covariance kernel estimation and goodness-of-fit testing for "
                 "parabolic stochastic PDE observations"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::uint64_t seed_value = 0;
    app.add_option("--config", opts.config_path, "JSON configuration file");
    auto* seed_opt = app.add_option("--seed", seed_value, "master RNG seed (overrides config)");
    app.add_option("--out", opts.out_dir, "output directory (default .)");
    app.add_option("--threads", opts.threads, "worker threads for the studies")
        ->check(CLI::PositiveNumber);
    app.add_flag("--full", opts.full, "replication counts of the original studies");
    app.add_flag("--paper-scale", opts.paper_scale,
                 "full-resolution finite element simulation");
    app.add_flag("--dump-paths", opts.dump_paths,
                 "write simulated paths as step,node,value CSV files");

    auto* cmd_simulate = app.add_subcommand("simulate", "simulate solution paths");
    auto* cmd_estimate =
        app.add_subcommand("estimate", "realized covariation of observed increments");
    auto* cmd_test_fixed =
        app.add_subcommand("test-fixed", "goodness-of-fit test against a fixed kernel");
    auto* cmd_test_parametric = app.add_subcommand(
        "test-parametric", "goodness-of-fit test against a parametric family");
    auto* cmd_rate = app.add_subcommand("rate-study", "estimation error versus step size");
    auto* cmd_rejection =
        app.add_subcommand("rejection-study", "test rejection rates over truth/null pairs");
    for (auto* sub : {cmd_simulate, cmd_estimate, cmd_test_fixed, cmd_test_parametric,
                      cmd_rate, cmd_rejection})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (seed_opt->count() > 0)
        opts.seed = seed_value;

    try {
        const json cfg = load_config(opts.config_path);
        if (cmd_simulate->parsed())
            return run_simulate(cfg, opts);
        if (cmd_estimate->parsed())
            return run_estimate(cfg, opts);
        if (cmd_test_fixed->parsed())
            return run_test_fixed(cfg, opts);
        if (cmd_test_parametric->parsed())
            return run_test_parametric(cfg, opts);
        if (cmd_rate->parsed())
            return run_rate_study(cfg, opts);
        if (cmd_rejection->parsed())
            return run_rejection_study(cfg, opts);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::out_of_range& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
