#include "kcgm/harness/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <toml.hpp>

#include "kcgm/harness/data.hpp"
#include "kcgm/rng.hpp"

namespace kcgm::harness {

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// RFC 4180 field quoting.
std::string field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::uint64_t trial_seed(std::uint64_t seed, Index n, Index trial) {
    return CounterRng::derive_key(seed, static_cast<std::uint64_t>(Stream::trial),
                                  static_cast<std::uint64_t>(n) * 1000003ULL + static_cast<std::uint64_t>(trial));
}

}  // namespace

std::string to_string(MethodKind kind) {
    switch (kind) {
        case MethodKind::sketched: return "sketched";
        case MethodKind::nystrom: return "nystrom";
        case MethodKind::classic: return "classic";
        case MethodKind::krr: return "krr";
    }
    return "unknown";
}

MethodKind parse_method_kind(const std::string& name) {
    for (auto k : {MethodKind::sketched, MethodKind::nystrom, MethodKind::classic, MethodKind::krr})
        if (name == to_string(k)) return k;
    throw std::invalid_argument("unknown method variant: " + name);
}

Index MethodSpec::sketch_dimension(Index n) const {
    if (kind == MethodKind::classic || kind == MethodKind::krr) return n;
    if (fixed_m) return std::min(*fixed_m, n);
    return sketch_dimension_schedule(n, zeta, gamma, m_rule);
}

void ExperimentConfig::validate() const {
    detail::require(!n_grid.empty(), "config: n_grid must not be empty");
    for (Index n : n_grid) detail::require(n >= 1, "config: n_grid entries must be positive");
    detail::require(trials >= 1, "config: trials must be >= 1");
    detail::require(quadrature_points >= 64, "config: quadrature_points must be >= 64");
    detail::require(noise_sd >= 0.0, "config: noise_sd must be non-negative");
    detail::require(!methods.empty(), "config: at least one method is required");
    std::set<std::string> names;
    for (const auto& m : methods) {
        detail::require(!m.name.empty(), "config: method name must not be empty");
        detail::require(names.insert(m.name).second, "config: duplicate method name " + m.name);
        if (m.kind == MethodKind::krr) {
            detail::require(!krr_lambda_grid.empty(), "config: krr needs a lambda grid");
            for (double l : krr_lambda_grid) detail::require(l > 0.0, "config: krr lambdas must be positive");
        }
        if (m.kind == MethodKind::nystrom)
            detail::require(m.sketch == SketchKind::nystrom_plain || m.sketch == SketchKind::nystrom_als ||
                                m.sketch == SketchKind::identity,
                            "config: nystrom method needs a subsampling sketch");
        if (m.fixed_m) detail::require(*m.fixed_m >= 1, "config: sketch.m must be positive");
        detail::require(m.t_max >= 0, "config: t_max must be non-negative");
        if (m.sketch == SketchKind::ros && (m.kind == MethodKind::sketched))
            for (Index n : n_grid) detail::require(is_power_of_two(n), "config: ros sketches need power-of-2 n");
    }
}

std::vector<MethodSpec> default_methods() {
    MethodSpec sketched;
    sketched.name = "sketched_ros";
    sketched.kind = MethodKind::sketched;
    sketched.sketch = SketchKind::ros;
    sketched.m_rule = ScheduleRegime::experiment_sketched;

    MethodSpec nystrom;
    nystrom.name = "nystrom_plain";
    nystrom.kind = MethodKind::nystrom;
    nystrom.sketch = SketchKind::nystrom_plain;
    nystrom.m_rule = ScheduleRegime::experiment_nystrom;

    MethodSpec krr;
    krr.name = "krr";
    krr.kind = MethodKind::krr;
    return {sketched, nystrom, krr};
}

std::vector<double> default_krr_lambda_grid() {
    std::vector<double> grid;
    for (int i = 0; i < 12; ++i) grid.push_back(std::pow(10.0, -6.0 + 6.0 * i / 11.0));
    return grid;
}

ExperimentConfig paper_preset() {
    ExperimentConfig c;
    c.seed = 20190101;
    c.trials = 100;
    c.methods = default_methods();
    c.krr_lambda_grid = default_krr_lambda_grid();
    return c;
}

ExperimentConfig ci_preset() {
    ExperimentConfig c = paper_preset();
    c.trials = 20;
    return c;
}

// ---------------------------------------------------------------------------
// TOML loading

namespace {

void reject_unknown_keys(const toml::table& table, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : table) {
        (void)value;
        const std::string k(key.str());
        detail::require(allowed.count(k) > 0, "config: unknown key '" + k + "' in " + where);
    }
}

template <typename T>
T required_as(const toml::node_view<const toml::node>& node, const std::string& what) {
    auto v = node.value<T>();
    detail::require(v.has_value(), "config: " + what + " has the wrong type");
    return *v;
}

double as_double(const toml::node_view<const toml::node>& node, const std::string& what) {
    if (auto i = node.value<std::int64_t>()) return static_cast<double>(*i);
    return required_as<double>(node, what);
}

MethodSpec parse_method(const toml::table& t) {
    reject_unknown_keys(t, {"name", "variant", "m_rule", "t_max", "zeta", "gamma", "sketch"}, "[[methods]]");
    MethodSpec m;
    const toml::node_view<const toml::node> view(t);
    m.name = required_as<std::string>(view["name"], "methods.name");
    m.kind = parse_method_kind(required_as<std::string>(view["variant"], "methods.variant"));
    if (m.kind == MethodKind::nystrom) {
        m.sketch = SketchKind::nystrom_plain;
        m.m_rule = ScheduleRegime::experiment_nystrom;
    }
    if (view["m_rule"]) m.m_rule = parse_schedule_regime(required_as<std::string>(view["m_rule"], "methods.m_rule"));
    if (view["t_max"]) m.t_max = required_as<std::int64_t>(view["t_max"], "methods.t_max");
    if (view["zeta"]) m.zeta = as_double(view["zeta"], "methods.zeta");
    if (view["gamma"]) m.gamma = as_double(view["gamma"], "methods.gamma");
    if (const auto* sketch = t["sketch"].as_table()) {
        reject_unknown_keys(*sketch, {"kind", "m", "seed", "lambda", "L"}, "methods.sketch");
        const toml::node_view<const toml::node> s(*sketch);
        if (s["kind"]) m.sketch = parse_sketch_kind(required_as<std::string>(s["kind"], "sketch.kind"));
        if (s["m"]) m.fixed_m = required_as<std::int64_t>(s["m"], "sketch.m");
        if (s["seed"]) m.sketch_seed = static_cast<std::uint64_t>(required_as<std::int64_t>(s["seed"], "sketch.seed"));
        if (s["lambda"]) m.als_lambda = as_double(s["lambda"], "sketch.lambda");
        if (s["L"]) m.als_factor = as_double(s["L"], "sketch.L");
    } else {
        detail::require(!t.contains("sketch"), "config: methods.sketch must be a table");
    }
    return m;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& toml_text) {
    toml::table root;
    try {
        root = toml::parse(toml_text);
    } catch (const toml::parse_error& e) {
        throw std::invalid_argument(std::string("config: TOML parse error: ") + std::string(e.description()));
    }
    reject_unknown_keys(root,
                        {"seed", "trials", "n_grid", "noise_sd", "quadrature_points", "output_path", "timing",
                         "threads", "krr", "methods"},
                        "top level");
    const toml::node_view<const toml::node> view(root);
    ExperimentConfig c;
    c.methods = default_methods();
    c.krr_lambda_grid = default_krr_lambda_grid();
    if (view["seed"]) c.seed = static_cast<std::uint64_t>(required_as<std::int64_t>(view["seed"], "seed"));
    if (view["trials"]) c.trials = required_as<std::int64_t>(view["trials"], "trials");
    if (view["noise_sd"]) c.noise_sd = as_double(view["noise_sd"], "noise_sd");
    if (view["quadrature_points"]) c.quadrature_points = required_as<std::int64_t>(view["quadrature_points"], "quadrature_points");
    if (view["output_path"]) c.output_path = required_as<std::string>(view["output_path"], "output_path");
    if (view["timing"]) c.timing = required_as<bool>(view["timing"], "timing");
    if (view["threads"]) c.threads = static_cast<unsigned>(required_as<std::int64_t>(view["threads"], "threads"));
    if (view["n_grid"]) {
        const auto* arr = root["n_grid"].as_array();
        detail::require(arr != nullptr, "config: n_grid must be an array");
        c.n_grid.clear();
        for (const auto& v : *arr) {
            auto n = v.value<std::int64_t>();
            detail::require(n.has_value(), "config: n_grid entries must be integers");
            c.n_grid.push_back(*n);
        }
    }
    if (const auto* krr = root["krr"].as_table()) {
        reject_unknown_keys(*krr, {"lambda_min", "lambda_max", "lambda_points", "lambda_grid"}, "[krr]");
        const toml::node_view<const toml::node> k(*krr);
        if (const auto* grid = (*krr)["lambda_grid"].as_array()) {
            c.krr_lambda_grid.clear();
            for (const auto& v : *grid) {
                auto d = v.value<double>();
                detail::require(d.has_value(), "config: krr.lambda_grid entries must be numbers");
                c.krr_lambda_grid.push_back(*d);
            }
        } else {
            const double lo = k["lambda_min"] ? as_double(k["lambda_min"], "krr.lambda_min") : 1e-6;
            const double hi = k["lambda_max"] ? as_double(k["lambda_max"], "krr.lambda_max") : 1.0;
            const auto points = k["lambda_points"] ? required_as<std::int64_t>(k["lambda_points"], "krr.lambda_points") : 12;
            detail::require(lo > 0.0 && hi >= lo && points >= 1, "config: invalid krr lambda range");
            c.krr_lambda_grid.clear();
            for (std::int64_t i = 0; i < points; ++i) {
                const double frac = points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(points - 1);
                c.krr_lambda_grid.push_back(std::exp(std::log(lo) + frac * (std::log(hi) - std::log(lo))));
            }
        }
    }
    if (root.contains("methods")) {
        const auto* arr = root["methods"].as_array();
        detail::require(arr != nullptr, "config: methods must be an array of tables");
        c.methods.clear();
        for (const auto& node : *arr) {
            const auto* t = node.as_table();
            detail::require(t != nullptr, "config: methods entries must be tables");
            c.methods.push_back(parse_method(*t));
        }
    }
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    detail::require(static_cast<bool>(in), "config: cannot read " + path.string());
    std::stringstream text;
    text << in.rdbuf();
    ExperimentConfig c = parse_experiment_config(text.str());
    if (!c.output_path.empty() && c.output_path.is_relative()) c.output_path = path.parent_path() / c.output_path;
    return c;
}

// ---------------------------------------------------------------------------
// Running

std::vector<TrialResult> run_trial(const ExperimentConfig& config, Index n, Index trial) {
    const std::uint64_t seed = trial_seed(config.seed, n, trial);
    const Dataset<double> data = generate_data(n, seed, config.noise_sd);
    const KernelSpec kernel = KernelSpec::sobolev();
    const Index quadrature = config.quadrature_points;
    const ErrorFunction<double> error = [quadrature](const Predictor<double>& p) {
        return prediction_error(p, quadrature);
    };

    std::vector<TrialResult> out;
    for (const auto& method : config.methods) {
        const auto start = std::chrono::steady_clock::now();
        TrialResult r;
        r.n = n;
        r.method = method.name;
        r.trial = trial;
        r.trial_seed = seed;
        r.m = method.sketch_dimension(n);
        if (method.kind == MethodKind::krr) {
            const auto krr = fit_krr(data, kernel, config.krr_lambda_grid, error);
            r.min_error = *std::min_element(krr.errors.begin(), krr.errors.end());
            r.min_error_t = 0;
            r.per_iteration.push_back({0, r.min_error, training_error(krr.predictor, data)});
        } else {
            SolverConfig solver;
            solver.variant = method.kind == MethodKind::sketched ? Variant::sketched
                           : method.kind == MethodKind::nystrom  ? Variant::nystrom
                                                                 : Variant::classic;
            solver.sketch.kind = method.sketch;
            solver.sketch.m = r.m;
            solver.sketch.seed = splitmix64(seed ^ fnv1a(method.name) ^ splitmix64(method.sketch_seed));
            solver.sketch.lambda = method.als_lambda;
            solver.sketch.approximation_factor = method.als_factor;
            solver.t_max = method.t_max > 0 ? method.t_max : r.m;
            solver.stopping = OracleMinError{};
            const auto result = fit(data, kernel, solver, error);
            for (Index t = 1; t <= result.trace.size(); ++t) {
                r.per_iteration.push_back({t, result.oracle_errors[static_cast<std::size_t>(t - 1)],
                                           training_error(result.predictor_at(t), data)});
            }
            r.min_error_t = result.decision.t_hat;
            r.min_error = r.min_error_t > 0 ? result.oracle_errors[static_cast<std::size_t>(r.min_error_t - 1)]
                                            : prediction_error(result.predictor, quadrature);
        }
        if (config.timing)
            r.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        out.push_back(std::move(r));
    }
    return out;
}

unsigned worker_count(unsigned requested) {
    unsigned count = requested > 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("KCGM_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1) count = std::min(count, static_cast<unsigned>(cap));
    }
    return std::max(1u, count);
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    std::ofstream trials_file, summary_file, curves_file;
    if (!config.output_path.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(config.output_path, ec);
        trials_file.open(config.output_path / "trials.csv");
        summary_file.open(config.output_path / "summary.csv");
        curves_file.open(config.output_path / "curves.csv");
        if (ec || !trials_file || !summary_file || !curves_file)
            throw std::runtime_error("experiment: cannot write to " + config.output_path.string());
    }

    std::vector<std::pair<Index, Index>> work;
    for (Index n : config.n_grid)
        for (Index t = 0; t < config.trials; ++t) work.emplace_back(n, t);

    std::vector<std::vector<TrialResult>> slots(work.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < work.size(); i = next++) {
            try {
                slots[i] = run_trial(config, work[i].first, work[i].second);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = work.size();
            }
        }
    };
    const unsigned threads = std::min<unsigned>(worker_count(config.threads), static_cast<unsigned>(work.size()));
    {
        std::vector<std::jthread> pool;
        for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
        worker();
    }
    if (failure) std::rethrow_exception(failure);

    ExperimentResult result;
    for (auto& slot : slots)
        for (auto& r : slot) result.trials.push_back(std::move(r));
    // Method order follows the config, then n, then trial.
    std::map<std::string, std::size_t> rank;
    for (std::size_t i = 0; i < config.methods.size(); ++i) rank[config.methods[i].name] = i;
    std::stable_sort(result.trials.begin(), result.trials.end(), [&](const TrialResult& a, const TrialResult& b) {
        return std::tuple(rank[a.method], a.n, a.trial) < std::tuple(rank[b.method], b.n, b.trial);
    });
    result.summary = summarize(result.trials);
    result.curves = average_curves(result.trials);

    if (!config.output_path.empty()) {
        write_trials_csv(trials_file, result.trials);
        write_summary_csv(summary_file, result.summary);
        write_curves_csv(curves_file, result.curves);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Aggregation and output

std::vector<SummaryRow> summarize(const std::vector<TrialResult>& trials) {
    std::vector<SummaryRow> rows;
    std::size_t i = 0;
    while (i < trials.size()) {
        std::size_t j = i;
        while (j < trials.size() && trials[j].method == trials[i].method && trials[j].n == trials[i].n) ++j;
        const double count = static_cast<double>(j - i);
        SummaryRow row;
        row.method = trials[i].method;
        row.n = trials[i].n;
        row.m = trials[i].m;
        double sum = 0.0, sum_t = 0.0, sum_ms = 0.0;
        for (std::size_t k = i; k < j; ++k) {
            sum += trials[k].min_error;
            sum_t += static_cast<double>(trials[k].min_error_t);
            sum_ms += trials[k].runtime_ms;
        }
        row.mean_min_error = sum / count;
        double ss = 0.0;
        for (std::size_t k = i; k < j; ++k) ss += std::pow(trials[k].min_error - row.mean_min_error, 2);
        row.stderr_min_error = count > 1 ? std::sqrt(ss / (count - 1.0)) / std::sqrt(count) : 0.0;
        row.mean_scaled_error = std::pow(static_cast<double>(row.n), 2.0 / 3.0) * row.mean_min_error;
        row.mean_best_t = sum_t / count;
        row.mean_runtime_ms = sum_ms / count;
        rows.push_back(row);
        i = j;
    }
    return rows;
}

std::vector<CurvePoint> average_curves(const std::vector<TrialResult>& trials) {
    // Keyed by (first-appearance order of method, n, t) so output follows the input order.
    std::map<std::string, std::size_t> order;
    for (const auto& r : trials) order.emplace(r.method, order.size());
    struct Acc {
        double prediction = 0.0;
        double training = 0.0;
        std::size_t count = 0;
    };
    std::map<std::tuple<std::size_t, Index, Index>, Acc> acc;
    for (const auto& r : trials) {
        for (const auto& e : r.per_iteration) {
            auto& a = acc[{order[r.method], r.n, e.t}];
            a.prediction += e.prediction_error;
            a.training += e.training_error;
            ++a.count;
        }
    }
    std::vector<std::string> names(order.size());
    for (const auto& [name, idx] : order) names[idx] = name;
    std::vector<CurvePoint> out;
    for (const auto& [key, a] : acc) {
        const auto& [method_idx, n, t] = key;
        out.push_back({names[method_idx], n, t, a.prediction / static_cast<double>(a.count),
                       a.training / static_cast<double>(a.count)});
    }
    return out;
}

void write_trials_csv(std::ostream& out, const std::vector<TrialResult>& trials) {
    out << "method,n,m,trial,t,prediction_error,training_error\r\n";
    for (const auto& r : trials)
        for (const auto& e : r.per_iteration)
            out << field(r.method) << ',' << r.n << ',' << r.m << ',' << r.trial << ',' << e.t << ','
                << number(e.prediction_error) << ',' << number(e.training_error) << "\r\n";
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
    out << "method,n,m,mean_min_error,stderr,mean_scaled_error,mean_best_t,mean_runtime_ms\r\n";
    for (const auto& r : rows)
        out << field(r.method) << ',' << r.n << ',' << r.m << ',' << number(r.mean_min_error) << ','
            << number(r.stderr_min_error) << ',' << number(r.mean_scaled_error) << ',' << number(r.mean_best_t)
            << ',' << number(r.mean_runtime_ms) << "\r\n";
}

void write_curves_csv(std::ostream& out, const std::vector<CurvePoint>& curves) {
    out << "method,n,t,mean_prediction_error,mean_training_error\r\n";
    for (const auto& c : curves)
        out << field(c.method) << ',' << c.n << ',' << c.t << ',' << number(c.mean_prediction_error) << ','
            << number(c.mean_training_error) << "\r\n";
}

double log_log_slope(const std::vector<SummaryRow>& rows, const std::string& method) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rows)
        if (r.method == method) pts.emplace_back(std::log(static_cast<double>(r.n)), std::log(r.mean_min_error));
    detail::require(pts.size() >= 2, "log_log_slope: need at least two sample sizes for " + method);
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : pts) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxy = 0.0, sxx = 0.0;
    for (const auto& [x, y] : pts) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    return sxy / sxx;
}

const SummaryRow* ExperimentResult::find_summary(const std::string& method, Index n) const {
    for (const auto& r : summary)
        if (r.method == method && r.n == n) return &r;
    return nullptr;
}

std::vector<CurvePoint> ExperimentResult::curve(const std::string& method, Index n) const {
    std::vector<CurvePoint> out;
    for (const auto& c : curves)
        if (c.method == method && c.n == n) out.push_back(c);
    return out;
}

}  // namespace kcgm::harness
