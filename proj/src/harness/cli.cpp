#include "kcgm/harness/cli.hpp"

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kcgm/harness/data.hpp"
#include "kcgm/harness/experiment.hpp"
#include "kcgm/rng.hpp"

namespace kcgm::harness {

namespace {

std::string number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

struct FitOptions {
    std::string method = "sketched";
    Index n = 256;
    std::optional<std::uint64_t> seed;
    std::string sketch;
    Index m = 0;
    Index t_max = 0;
    std::string stopping = "oracle";
    Index t = 1;
    double zeta = 0.5;
    double gamma = 0.5;
    double tau = 1.0;
    double delta = 0.1;
    std::string config;
};

struct ExperimentOptions {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<Index> trials;
    std::string preset = "paper";
};

struct DiagnoseOptions {
    Index n = 256;
    std::string lambda_grid = "1e-3:1:8";
    std::string sketch = "ros";
    Index m = 0;
    std::uint64_t seed = 0;
};

// "a:b:k" -> k log-spaced values from a to b.
std::vector<double> parse_lambda_grid(const std::string& spec) {
    const auto first = spec.find(':');
    const auto second = spec.find(':', first == std::string::npos ? first : first + 1);
    detail::require(first != std::string::npos && second != std::string::npos,
                    "--lambda-grid must look like min:max:count");
    double lo = 0.0, hi = 0.0;
    long count = 0;
    try {
        std::size_t used = 0;
        lo = std::stod(spec.substr(0, first), &used);
        detail::require(used == first, "--lambda-grid: bad minimum");
        hi = std::stod(spec.substr(first + 1, second - first - 1));
        count = std::stol(spec.substr(second + 1));
    } catch (const std::logic_error&) {
        throw std::invalid_argument("--lambda-grid must look like min:max:count");
    }
    detail::require(lo > 0.0 && hi >= lo && count >= 1, "--lambda-grid: need 0 < min <= max and count >= 1");
    std::vector<double> grid;
    for (long i = 0; i < count; ++i) {
        const double frac = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
        grid.push_back(std::exp(std::log(lo) + frac * (std::log(hi) - std::log(lo))));
    }
    return grid;
}

int run_fit(const FitOptions& o, std::ostream& out) {
    ExperimentConfig defaults = paper_preset();
    if (!o.config.empty()) defaults = load_experiment_config(o.config);
    const std::uint64_t seed = o.seed.value_or(defaults.seed);
    const MethodKind kind = parse_method_kind(o.method);
    detail::require(o.n >= 1, "--n must be positive");

    const Dataset<double> data = generate_data(o.n, seed, defaults.noise_sd);
    const KernelSpec kernel = KernelSpec::sobolev();
    const Index quadrature = defaults.quadrature_points;
    const ErrorFunction<double> error = [quadrature](const Predictor<double>& p) {
        return prediction_error(p, quadrature);
    };

    out << "method=" << to_string(kind) << "\n";
    out << "n=" << o.n << "\n";
    out << "seed=" << seed << "\n";
    if (kind == MethodKind::krr) {
        const auto krr = fit_krr(data, kernel, defaults.krr_lambda_grid, error);
        out << "lambda=" << number(krr.lambda) << "\n";
        out << "t_hat=0\n";
        out << "prediction_error=" << number(prediction_error(krr.predictor, quadrature)) << "\n";
        out << "training_error=" << number(training_error(krr.predictor, data)) << "\n";
        return 0;
    }

    SolverConfig config;
    MethodSpec spec;
    spec.kind = kind;
    spec.zeta = o.zeta;
    spec.gamma = o.gamma;
    switch (kind) {
        case MethodKind::sketched:
            config.variant = Variant::sketched;
            spec.sketch = SketchKind::ros;
            spec.m_rule = ScheduleRegime::experiment_sketched;
            break;
        case MethodKind::nystrom:
            config.variant = Variant::nystrom;
            spec.sketch = SketchKind::nystrom_plain;
            spec.m_rule = ScheduleRegime::experiment_nystrom;
            break;
        default:
            config.variant = Variant::classic;
            spec.sketch = SketchKind::identity;
            break;
    }
    if (!o.sketch.empty()) spec.sketch = parse_sketch_kind(o.sketch);
    if (o.m > 0) spec.fixed_m = o.m;
    const Index m = spec.sketch_dimension(o.n);
    config.sketch.kind = kind == MethodKind::classic ? SketchKind::identity : spec.sketch;
    config.sketch.m = m;
    config.sketch.seed = seed;
    config.t_max = o.t_max;

    double threshold = 0.0;
    if (o.stopping == "oracle") {
        config.stopping = OracleMinError{};
    } else if (o.stopping == "threshold") {
        config.stopping = ResidualThreshold{o.zeta, o.gamma, o.tau, o.delta};
        threshold = stopping_threshold(o.n, o.zeta, o.gamma, o.tau, o.delta);
    } else if (o.stopping == "fixed") {
        detail::require(o.t >= 1, "--t must be >= 1");
        config.stopping = FixedIterations{o.t};
    } else {
        throw std::invalid_argument("--stopping must be oracle, threshold or fixed");
    }

    const auto result = fit(data, kernel, config, error);
    out << "m=" << m << "\n";
    out << "iterations=" << result.trace.size() << "\n";
    if (o.stopping == "threshold") {
        out << "threshold=" << number(threshold) << "\n";
        out << "threshold_reached=" << (result.decision.reached ? "true" : "false") << "\n";
    }
    out << "t_hat=" << result.decision.t_hat << "\n";
    out << "prediction_error=" << number(prediction_error(result.predictor, quadrature)) << "\n";
    out << "training_error=" << number(training_error(result.predictor, data)) << "\n";
    return 0;
}

int run_experiment_command(const ExperimentOptions& o, std::ostream& out) {
    ExperimentConfig config;
    if (!o.config.empty())
        config = load_experiment_config(o.config);
    else if (o.preset == "paper")
        config = paper_preset();
    else if (o.preset == "ci")
        config = ci_preset();
    else
        throw std::invalid_argument("--preset must be paper or ci");
    if (!o.out.empty()) config.output_path = o.out;
    if (o.seed) config.seed = *o.seed;
    if (o.trials) config.trials = *o.trials;
    config.validate();
    detail::require(!config.output_path.empty(), "experiment: no output path (use --out or output_path)");

    const ExperimentResult result = run_experiment(config);
    write_summary_csv(out, result.summary);
    return 0;
}

int run_diagnose(const DiagnoseOptions& o, std::ostream& out) {
    detail::require(o.n >= 1, "--n must be positive");
    const std::vector<double> lambdas = parse_lambda_grid(o.lambda_grid);
    const SketchKind kind = parse_sketch_kind(o.sketch);
    const bool subsampling =
        kind == SketchKind::nystrom_plain || kind == SketchKind::nystrom_als;
    const Index m = o.m > 0 ? std::min(o.m, o.n)
                            : sketch_dimension_schedule(o.n, 0.5, 0.5,
                                                        subsampling ? ScheduleRegime::experiment_nystrom
                                                                    : ScheduleRegime::experiment_sketched);

    const KernelSpec kernel = KernelSpec::sobolev();
    const Dataset<double> data = generate_data(o.n, o.seed);
    const GramMatrix<double> k = gram(kernel, data.x);
    const Vector<double> y_bar = data.y_bar();

    auto reduce = [&](double lambda) {
        SketchParams params;
        params.kind = kind;
        params.m = kind == SketchKind::identity ? o.n : m;
        params.seed = o.seed;
        params.lambda = lambda;
        const auto g = make_sketch(params, o.n, &k);
        if (!g.is_subsampling()) return reduce_sketched(k, g, y_bar);
        const Matrix<double> sub = detail::select_rows(data.x, g.indices);
        return reduce_nystrom(gram(kernel, sub, data.x), gram(kernel, sub), y_bar, g.indices);
    };

    out << "lambda,effective_dimension,projection_error,m\n";
    std::optional<ReducedProblem<double>> shared;
    for (double lambda : lambdas) {
        // Only leverage-score sampling depends on lambda.
        if (kind == SketchKind::nystrom_als || !shared) shared = reduce(lambda);
        const SpectralReport r = spectral_report(k, lambda, *shared, kind == SketchKind::identity ? o.n : m);
        out << number(r.lambda) << ',' << number(r.effective_dimension) << ',' << number(r.projection_error) << ','
            << r.m_used << "\n";
    }
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Projected kernel conjugate-gradient regression", "kcgm"};
    app.require_subcommand(1);

    FitOptions fit_opts;
    auto* fit_cmd = app.add_subcommand("fit", "Fit one method on one synthetic dataset");
    fit_cmd->add_option("--method", fit_opts.method, "sketched, nystrom, classic or krr")->capture_default_str();
    fit_cmd->add_option("--n", fit_opts.n, "Sample size")->capture_default_str();
    fit_cmd->add_option("--seed", fit_opts.seed, "Data and sketch seed");
    fit_cmd->add_option("--sketch", fit_opts.sketch, "Sketch kind (gaussian, rademacher, ros, nystrom_plain, nystrom_als, identity)");
    fit_cmd->add_option("--m", fit_opts.m, "Sketch dimension (default: experiment schedule)");
    fit_cmd->add_option("--t-max", fit_opts.t_max, "Maximum iterations (default: m)");
    fit_cmd->add_option("--stopping", fit_opts.stopping, "oracle, threshold or fixed")->capture_default_str();
    fit_cmd->add_option("--t", fit_opts.t, "Iteration count for fixed stopping")->capture_default_str();
    fit_cmd->add_option("--zeta", fit_opts.zeta, "Source exponent")->capture_default_str();
    fit_cmd->add_option("--gamma", fit_opts.gamma, "Capacity exponent")->capture_default_str();
    fit_cmd->add_option("--tau", fit_opts.tau, "Threshold constant")->capture_default_str();
    fit_cmd->add_option("--delta", fit_opts.delta, "Confidence level")->capture_default_str();
    fit_cmd->add_option("--config", fit_opts.config, "TOML config supplying noise, quadrature and KRR grid");

    ExperimentOptions exp_opts;
    auto* exp_cmd = app.add_subcommand("experiment", "Run the synthetic benchmark and write CSV files");
    exp_cmd->add_option("--config", exp_opts.config, "TOML experiment config");
    exp_cmd->add_option("--preset", exp_opts.preset, "Built-in config when --config is absent: paper or ci")
        ->capture_default_str();
    exp_cmd->add_option("--out", exp_opts.out, "Output directory (overrides output_path)");
    exp_cmd->add_option("--seed", exp_opts.seed, "Master seed (overrides the config)");
    exp_cmd->add_option("--trials", exp_opts.trials, "Trials per sample size (overrides the config)");

    DiagnoseOptions diag_opts;
    auto* diag_cmd = app.add_subcommand("diagnose", "Effective dimension and projection error sweep");
    diag_cmd->add_option("--n", diag_opts.n, "Sample size")->capture_default_str();
    diag_cmd->add_option("--lambda-grid", diag_opts.lambda_grid, "min:max:count, log-spaced")->capture_default_str();
    diag_cmd->add_option("--sketch", diag_opts.sketch, "Sketch kind")->capture_default_str();
    diag_cmd->add_option("--m", diag_opts.m, "Sketch dimension (default: experiment schedule)");
    diag_cmd->add_option("--seed", diag_opts.seed, "Data and sketch seed")->capture_default_str();

    if (argc > 1 && argv[1][0] != '-' && app.get_subcommand_no_throw(argv[1]) == nullptr) {
        err << "error: unknown subcommand '" << argv[1] << "'\n" << app.help();
        return 2;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        app.exit(e, err, err);
        return 2;
    }

    try {
        if (*fit_cmd) return run_fit(fit_opts, out);
        if (*exp_cmd) return run_experiment_command(exp_opts, out);
        if (*diag_cmd) return run_diagnose(diag_opts, out);
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    err << app.help();
    return 2;
}

}  // namespace kcgm::harness
