#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kcgm/diagnostics.hpp"
#include "kcgm/solver.hpp"

namespace kcgm::harness {

enum class MethodKind { sketched, nystrom, classic, krr };

std::string to_string(MethodKind kind);
MethodKind parse_method_kind(const std::string& name);

/// One estimator in an experiment. For the KCGM variants the sketch
/// dimension is `fixed_m` if set, otherwise the schedule `m_rule`.
struct MethodSpec {
    std::string name;
    MethodKind kind = MethodKind::sketched;
    SketchKind sketch = SketchKind::ros;
    ScheduleRegime m_rule = ScheduleRegime::experiment_sketched;
    std::optional<Index> fixed_m;
    // Mixed into each trial's sketch seed.
    std::uint64_t sketch_seed = 0;
    double als_lambda = 1e-3;
    double als_factor = 1.0;
    // Source/capacity exponents for the theory schedules.
    double zeta = 0.5;
    double gamma = 0.5;
    // 0 means t_max = m.
    Index t_max = 0;

    Index sketch_dimension(Index n) const;
};

struct ExperimentConfig {
    std::vector<Index> n_grid{32, 64, 128, 256, 512, 1024};
    Index trials = 100;
    std::vector<MethodSpec> methods;
    double noise_sd = 1.0;
    std::uint64_t seed = 0;
    Index quadrature_points = 2048;
    std::vector<double> krr_lambda_grid;
    // Directory receiving trials.csv, summary.csv and curves.csv; empty skips writing.
    std::filesystem::path output_path;
    // Worker threads; 0 means KCGM_THREADS or the hardware concurrency.
    unsigned threads = 0;
    // When false runtimes are recorded as 0 so outputs are byte-reproducible.
    bool timing = true;

    void validate() const;
};

struct IterationError {
    Index t = 0;
    double prediction_error = 0.0;
    double training_error = 0.0;
};

struct TrialResult {
    Index n = 0;
    Index m = 0;
    std::string method;
    Index trial = 0;
    std::uint64_t trial_seed = 0;
    std::vector<IterationError> per_iteration;
    double min_error = 0.0;
    Index min_error_t = 0;
    double runtime_ms = 0.0;
};

struct SummaryRow {
    std::string method;
    Index n = 0;
    Index m = 0;
    double mean_min_error = 0.0;
    double stderr_min_error = 0.0;
    double mean_scaled_error = 0.0;
    double mean_best_t = 0.0;
    double mean_runtime_ms = 0.0;
};

// Trial-averaged error at one iteration.
struct CurvePoint {
    std::string method;
    Index n = 0;
    Index t = 0;
    double mean_prediction_error = 0.0;
    double mean_training_error = 0.0;
};

struct ExperimentResult {
    std::vector<TrialResult> trials;
    std::vector<SummaryRow> summary;
    std::vector<CurvePoint> curves;

    const SummaryRow* find_summary(const std::string& method, Index n) const;
    std::vector<CurvePoint> curve(const std::string& method, Index n) const;
};

/// Standard presets: ROS sketched KCGM with m = ceil(n^{1/3}), plain Nystrom
/// KCGM with m = ceil(n^{2/3}) and oracle-lambda KRR on 12 log-spaced lambdas
/// in [1e-6, 1].
std::vector<MethodSpec> default_methods();
std::vector<double> default_krr_lambda_grid();
ExperimentConfig paper_preset();
ExperimentConfig ci_preset();

ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(const std::string& toml_text);

/// Runs one trial of every method on a shared dataset.
std::vector<TrialResult> run_trial(const ExperimentConfig& config, Index n, Index trial);

/// Runs every (n, trial) on a worker pool, aggregates and writes CSVs when
/// config.output_path is set. Output order is independent of scheduling.
ExperimentResult run_experiment(const ExperimentConfig& config);

std::vector<SummaryRow> summarize(const std::vector<TrialResult>& trials);
std::vector<CurvePoint> average_curves(const std::vector<TrialResult>& trials);

void write_trials_csv(std::ostream& out, const std::vector<TrialResult>& trials);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
void write_curves_csv(std::ostream& out, const std::vector<CurvePoint>& curves);

/// Least-squares slope of log(mean_min_error) against log(n) for a method.
double log_log_slope(const std::vector<SummaryRow>& rows, const std::string& method);

unsigned worker_count(unsigned requested);

}  // namespace kcgm::harness
