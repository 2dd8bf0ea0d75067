#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <variant>
#include <vector>

#include <Eigen/Eigenvalues>

#include "kcgm/core.hpp"
#include "kcgm/kernel.hpp"
#include "kcgm/krylov.hpp"
#include "kcgm/reduce.hpp"
#include "kcgm/sketch.hpp"

namespace kcgm {

/// Training sample; points are rows of x.
template <typename Scalar>
struct Dataset {
    Matrix<Scalar> x;
    Vector<Scalar> y;

    Index size() const { return x.rows(); }
    // y / sqrt(n)
    Vector<Scalar> y_bar() const { return y / std::sqrt(Scalar(size())); }
};

/// f(x) = scale * sum_i coefficients_i k(anchors_i, x).
template <typename Scalar>
struct Predictor {
    Matrix<Scalar> anchors;
    Vector<Scalar> coefficients;
    KernelSpec kernel;
    Scalar scale = 1;
    Index chosen_t = 0;

    template <typename Derived>
    Vector<Scalar> predict(const Eigen::MatrixBase<Derived>& points) const {
        if (coefficients.size() == 0) return Vector<Scalar>::Zero(points.rows());
        return scale * (kernel_matrix(kernel, points, anchors) * coefficients);
    }

    Scalar operator()(Scalar x) const {
        return predict(Matrix<Scalar>::Constant(1, 1, x))(0);
    }
};

// Stopping rules.
struct FixedIterations {
    Index t = 1;
};

// First t with residual <= tau * log^{3/2}(2/delta) * n^{-(zeta+1/2)/max(1, 2 zeta + gamma)} * b^{zeta+1/2}.
struct ResidualThreshold {
    double zeta = 0.5;
    double gamma = 0.5;
    double tau = 1.0;
    double delta = 0.1;
};

// argmin over t <= t_max of a caller-supplied error (e.g. held-out or true-function error).
struct OracleMinError {};

using StoppingRule = std::variant<FixedIterations, ResidualThreshold, OracleMinError>;

struct SolverConfig {
    Variant variant = Variant::sketched;
    SketchParams sketch;
    // 0 selects the default: m for projected variants, n for classic.
    Index t_max = 0;
    StoppingRule stopping = OracleMinError{};
};

struct StoppingDecision {
    double threshold_value = 0.0;
    Index t_hat = 0;
    double residual_at_stop = 0.0;
    // False when a threshold rule never fired within t_max.
    bool reached = true;
};

/// b_{n,zeta,gamma}: max(1, gamma ln n) when 2 zeta + gamma <= 1, else 1.
inline double log_factor(double n, double zeta, double gamma) {
    if (2.0 * zeta + gamma <= 1.0) return std::max(1.0, gamma * std::log(n));
    return 1.0;
}

inline double stopping_threshold(double n, double zeta, double gamma, double tau, double delta) {
    detail::require(n >= 1, "stopping_threshold: n must be positive");
    detail::require(zeta >= 0.0, "stopping_threshold: zeta must be >= 0");
    detail::require(gamma > 0.0 && gamma <= 1.0, "stopping_threshold: gamma must lie in (0, 1]");
    detail::require(tau > 0.0, "stopping_threshold: tau must be positive");
    detail::require(delta > 0.0 && delta < 1.0, "stopping_threshold: delta must lie in (0, 1)");
    const double exponent = (zeta + 0.5) / std::max(1.0, 2.0 * zeta + gamma);
    return tau * std::pow(std::log(2.0 / delta), 1.5) * std::pow(n, -exponent) *
           std::pow(log_factor(n, zeta, gamma), zeta + 0.5);
}

/// First t (1-based) whose residual is <= threshold; t_max with reached=false otherwise.
template <typename Scalar>
StoppingDecision first_crossing(const std::vector<Scalar>& residuals, double threshold) {
    StoppingDecision d;
    d.threshold_value = threshold;
    for (std::size_t i = 0; i < residuals.size(); ++i) {
        if (static_cast<double>(residuals[i]) <= threshold) {
            d.t_hat = static_cast<Index>(i + 1);
            d.residual_at_stop = static_cast<double>(residuals[i]);
            return d;
        }
    }
    d.reached = false;
    d.t_hat = static_cast<Index>(residuals.size());
    if (!residuals.empty()) d.residual_at_stop = static_cast<double>(residuals.back());
    return d;
}

template <typename Scalar>
using ErrorFunction = std::function<Scalar(const Predictor<Scalar>&)>;

template <typename Scalar>
struct FitResult {
    ReducedProblem<Scalar> problem;
    SketchOperator<Scalar> sketch;
    SolveTrace<Scalar> trace;
    StoppingDecision decision;
    Predictor<Scalar> predictor;
    // Per-iteration values of the error function (oracle stopping only).
    std::vector<Scalar> oracle_errors;

    /// Predictor built from iterate a_t (t in 1..trace.size(); t = 0 is the zero predictor).
    Predictor<Scalar> predictor_at(Index t) const {
        detail::require(t >= 0 && t <= trace.size(), "predictor_at: iteration out of range");
        Predictor<Scalar> p = predictor;
        p.chosen_t = t;
        if (t == 0) {
            p.coefficients = Vector<Scalar>::Zero(p.anchors.rows());
        } else {
            p.coefficients = problem.back_map.coefficients(trace.iterates[static_cast<std::size_t>(t - 1)]);
        }
        return p;
    }
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> select_rows(const Matrix<Scalar>& x, const std::vector<Index>& rows) {
    Matrix<Scalar> out(static_cast<Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = x.row(rows[i]);
    return out;
}

}  // namespace detail

/// Projected KCGM end to end: reduce, run the Krylov iteration up to t_max,
/// pick t by the stopping rule and map a_t back to a predictor.
template <typename Scalar>
FitResult<Scalar> fit(const Dataset<Scalar>& data, const KernelSpec& kernel, const SolverConfig& config,
                      const ErrorFunction<Scalar>& error = {}) {
    const Index n = data.size();
    detail::require(n >= 1, "fit: empty dataset");
    detail::require(data.y.size() == n, "fit: response length mismatch");
    detail::require(config.t_max >= 0, "fit: t_max must be non-negative");
    if (std::holds_alternative<OracleMinError>(config.stopping))
        detail::require(static_cast<bool>(error), "fit: oracle stopping needs an error function");
    check_bounded(kernel, data.x);

    FitResult<Scalar> out;
    const Vector<Scalar> y_bar = data.y_bar();
    Index default_t = n;
    switch (config.variant) {
        case Variant::classic: {
            out.problem = reduce_classic(gram(kernel, data.x), y_bar);
            break;
        }
        case Variant::sketched: {
            const auto k = gram(kernel, data.x);
            out.sketch = make_sketch(config.sketch, n, &k);
            out.problem = reduce_sketched(k, out.sketch, y_bar);
            default_t = out.sketch.m;
            break;
        }
        case Variant::nystrom: {
            detail::require(config.sketch.kind == SketchKind::nystrom_plain ||
                                config.sketch.kind == SketchKind::nystrom_als ||
                                config.sketch.kind == SketchKind::identity,
                            "fit: nystrom variant needs a subsampling sketch");
            if (config.sketch.kind == SketchKind::nystrom_als) {
                const auto k = gram(kernel, data.x);
                out.sketch = make_sketch(config.sketch, n, &k);
            } else {
                out.sketch = make_sketch<Scalar>(config.sketch, n);
            }
            if (out.sketch.kind == SketchKind::identity) {
                out.sketch.indices.resize(static_cast<std::size_t>(n));
                std::iota(out.sketch.indices.begin(), out.sketch.indices.end(), Index(0));
            }
            const Matrix<Scalar> sub = detail::select_rows(data.x, out.sketch.indices);
            out.problem = reduce_nystrom(gram(kernel, sub, data.x), gram(kernel, sub), y_bar,
                                         out.sketch.indices);
            default_t = out.sketch.m;
            break;
        }
    }
    const Index t_max = config.t_max > 0 ? config.t_max : default_t;

    out.trace = config.variant == Variant::classic ? krylov_weighted(out.problem.k_tilde, out.problem.b, t_max)
                                                   : krylov_minres(out.problem.k_tilde, out.problem.b, t_max);

    out.predictor.anchors = detail::select_rows(data.x, out.problem.back_map.anchors);
    out.predictor.kernel = kernel;
    out.predictor.scale = out.problem.back_map.scale;

    StoppingDecision& d = out.decision;
    if (out.trace.trivial) {
        d.t_hat = 0;
        d.residual_at_stop = 0.0;
    } else if (const auto* fixed = std::get_if<FixedIterations>(&config.stopping)) {
        detail::require(fixed->t >= 1, "fit: fixed stopping needs t >= 1");
        d.t_hat = std::min(fixed->t, out.trace.size());
        d.residual_at_stop = static_cast<double>(out.trace.residuals[static_cast<std::size_t>(d.t_hat - 1)]);
        d.threshold_value = std::numeric_limits<double>::quiet_NaN();
    } else if (const auto* rule = std::get_if<ResidualThreshold>(&config.stopping)) {
        d = first_crossing(out.trace.residuals,
                           stopping_threshold(static_cast<double>(n), rule->zeta, rule->gamma, rule->tau, rule->delta));
    } else {
        d.threshold_value = std::numeric_limits<double>::quiet_NaN();
        Scalar best = std::numeric_limits<Scalar>::infinity();
        for (Index t = 1; t <= out.trace.size(); ++t) {
            const Scalar e = error(out.predictor_at(t));
            out.oracle_errors.push_back(e);
            if (e < best) {
                best = e;
                d.t_hat = t;
            }
        }
        d.residual_at_stop = static_cast<double>(out.trace.residuals[static_cast<std::size_t>(d.t_hat - 1)]);
    }
    out.predictor = out.predictor_at(d.t_hat);
    return out;
}

template <typename Scalar>
struct KrrResult {
    Predictor<Scalar> predictor;
    double lambda = 0.0;
    std::vector<Scalar> errors;
};

/// Kernel ridge regression alpha = (K + n lambda I)^{-1} y on the unnormalized
/// Gram matrix, for each lambda in the grid; keeps the lambda with the
/// smallest error. A single-point grid needs no error function.
template <typename Scalar>
KrrResult<Scalar> fit_krr(const Dataset<Scalar>& data, const KernelSpec& kernel,
                          const std::vector<double>& lambda_grid, const ErrorFunction<Scalar>& error = {}) {
    detail::require(!lambda_grid.empty(), "fit_krr: empty lambda grid");
    for (double l : lambda_grid) detail::require(l > 0.0, "fit_krr: lambda must be positive");
    detail::require(lambda_grid.size() == 1 || static_cast<bool>(error),
                    "fit_krr: lambda selection needs an error function");
    const Index n = data.size();
    detail::require(n >= 1 && data.y.size() == n, "fit_krr: inconsistent dataset");
    check_bounded(kernel, data.x);

    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(kernel_matrix(kernel, data.x, data.x));
    const Vector<Scalar> sigma = eig.eigenvalues().cwiseMax(Scalar(0));
    const Vector<Scalar> projected_y = eig.eigenvectors().transpose() * data.y;

    KrrResult<Scalar> out;
    Scalar best = std::numeric_limits<Scalar>::infinity();
    Predictor<Scalar> candidate;
    candidate.anchors = data.x;
    candidate.kernel = kernel;
    candidate.scale = 1;
    for (double lambda : lambda_grid) {
        const Scalar shift = Scalar(n) * static_cast<Scalar>(lambda);
        candidate.coefficients =
            eig.eigenvectors() * (projected_y.array() / (sigma.array() + shift)).matrix();
        const Scalar e = error ? error(candidate) : Scalar(0);
        out.errors.push_back(e);
        if (out.errors.size() == 1 || e < best) {
            best = e;
            out.lambda = lambda;
            out.predictor = candidate;
        }
    }
    return out;
}

}  // namespace kcgm
