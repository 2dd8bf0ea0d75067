#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include <Eigen/Eigenvalues>

#include "kcgm/core.hpp"
#include "kcgm/kernel.hpp"
#include "kcgm/reduce.hpp"

namespace kcgm {

struct SpectralReport {
    double lambda = 0.0;
    double effective_dimension = 0.0;
    double projection_error = 0.0;
    Index m_used = 0;
};

/// Empirical effective dimension tr(K (K + lambda I)^{-1}).
template <typename Scalar>
Scalar effective_dimension(const GramMatrix<Scalar>& k, double lambda) {
    detail::require(lambda > 0.0, "effective_dimension: lambda must be positive");
    detail::require(k.rows() == k.cols(), "effective_dimension: Gram matrix must be square");
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(detail::symmetric_part(k.entries),
                                                      Eigen::EigenvaluesOnly);
    const auto sigma = eig.eigenvalues().cwiseMax(Scalar(0)).array();
    return (sigma / (sigma + static_cast<Scalar>(lambda))).sum();
}

/// ||(I - P) T_x^{1/2}||^2 computed as lambda_max(K - C C^T), where C = S_x Q R
/// (the reduced problem's sample factor). The two operators share their
/// nonzero spectrum. An empty C means no projection.
template <typename Scalar>
Scalar projection_error(const GramMatrix<Scalar>& k, const Matrix<Scalar>& c) {
    detail::require(k.rows() == k.cols(), "projection_error: Gram matrix must be square");
    detail::require(c.cols() == 0 || c.rows() == k.rows(), "projection_error: dimension mismatch");
    Matrix<Scalar> residual = detail::symmetric_part(k.entries);
    if (c.cols() > 0) residual -= c * c.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(detail::symmetric_part(residual),
                                                      Eigen::EigenvaluesOnly);
    return std::max(Scalar(0), eig.eigenvalues().maxCoeff());
}

template <typename Scalar>
Scalar projection_error(const GramMatrix<Scalar>& k, const ReducedProblem<Scalar>& p) {
    if (p.variant == Variant::classic) return Scalar(0);
    return projection_error(k, p.sample_factor);
}

enum class ScheduleRegime { sketched, nystrom, experiment_sketched, experiment_nystrom };

inline std::string to_string(ScheduleRegime r) {
    switch (r) {
        case ScheduleRegime::sketched: return "sketched";
        case ScheduleRegime::nystrom: return "nystrom";
        case ScheduleRegime::experiment_sketched: return "experiment_sketched";
        case ScheduleRegime::experiment_nystrom: return "experiment_nystrom";
    }
    return "unknown";
}

inline ScheduleRegime parse_schedule_regime(std::string_view name) {
    for (auto r : {ScheduleRegime::sketched, ScheduleRegime::nystrom, ScheduleRegime::experiment_sketched,
                   ScheduleRegime::experiment_nystrom})
        if (name == to_string(r)) return r;
    throw std::invalid_argument("unknown schedule regime: " + std::string(name));
}

namespace detail {

// Ceiling that treats values within 1e-9 relative of an integer as that integer.
inline Index stable_ceil(double v) {
    const double nearest = std::round(v);
    if (std::abs(v - nearest) <= 1e-9 * std::max(1.0, std::abs(v))) return static_cast<Index>(nearest);
    return static_cast<Index>(std::ceil(v));
}

}  // namespace detail

/// Sketch dimension for sample size n with constants and log^beta factors set
/// to 1 (prediction norm, a = 0). Experiment presets are ceil(n^{1/3}) for
/// sketches and ceil(n^{2/3}) for Nystrom. The result is clipped to [1, n].
inline Index sketch_dimension_schedule(Index n, double zeta, double gamma, ScheduleRegime regime) {
    detail::require(n >= 1, "sketch_dimension_schedule: n must be positive");
    const double nn = static_cast<double>(n);
    double value = 0.0;
    switch (regime) {
        case ScheduleRegime::experiment_sketched: value = std::cbrt(nn); break;
        case ScheduleRegime::experiment_nystrom: value = std::pow(std::cbrt(nn), 2.0); break;
        case ScheduleRegime::sketched: {
            detail::require(zeta >= 0.0 && gamma > 0.0 && gamma <= 1.0,
                            "sketch_dimension_schedule: invalid zeta/gamma");
            const double capacity = 2.0 * zeta + gamma;
            if (capacity <= 1.0)
                value = std::pow(nn, gamma) * std::pow(std::max(1.0, gamma * std::log(nn)), -gamma);
            else if (zeta >= 1.0)
                value = std::pow(nn, gamma * zeta / capacity);
            else
                value = std::pow(nn, gamma / capacity);
            break;
        }
        case ScheduleRegime::nystrom: {
            detail::require(zeta >= 0.0 && gamma > 0.0 && gamma <= 1.0,
                            "sketch_dimension_schedule: invalid zeta/gamma");
            const double capacity = 2.0 * zeta + gamma;
            detail::require(capacity > 1.0, "sketch_dimension_schedule: nystrom needs 2 zeta + gamma > 1");
            value = std::pow(nn, std::max(1.0, zeta) / capacity) * std::max(1.0, gamma * std::log(nn));
            break;
        }
    }
    return std::clamp<Index>(detail::stable_ceil(value), 1, n);
}

template <typename Scalar>
SpectralReport spectral_report(const GramMatrix<Scalar>& k, double lambda, const ReducedProblem<Scalar>& p,
                               Index m_used) {
    SpectralReport r;
    r.lambda = lambda;
    r.effective_dimension = static_cast<double>(effective_dimension(k, lambda));
    r.projection_error = static_cast<double>(projection_error(k, p));
    r.m_used = m_used;
    return r;
}

}  // namespace kcgm
