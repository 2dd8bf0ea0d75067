#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Eigenvalues>

#include "kcgm/core.hpp"
#include "kcgm/kernel.hpp"
#include "kcgm/rng.hpp"

namespace kcgm {

enum class SketchKind { gaussian, rademacher, ros, nystrom_plain, nystrom_als, identity };

inline std::string to_string(SketchKind kind) {
    switch (kind) {
        case SketchKind::gaussian: return "gaussian";
        case SketchKind::rademacher: return "rademacher";
        case SketchKind::ros: return "ros";
        case SketchKind::nystrom_plain: return "nystrom_plain";
        case SketchKind::nystrom_als: return "nystrom_als";
        case SketchKind::identity: return "identity";
    }
    return "unknown";
}

inline SketchKind parse_sketch_kind(std::string_view name) {
    for (auto kind : {SketchKind::gaussian, SketchKind::rademacher, SketchKind::ros,
                      SketchKind::nystrom_plain, SketchKind::nystrom_als, SketchKind::identity})
        if (name == to_string(kind)) return kind;
    throw std::invalid_argument("unknown sketch kind: " + std::string(name));
}

/// Everything needed to realize a sketch apart from the data.
struct SketchParams {
    SketchKind kind = SketchKind::ros;
    Index m = 1;
    std::uint64_t seed = 0;
    // Regularization used for leverage scores (ALS only).
    double lambda = 1e-3;
    // Leverage-score approximation factor, >= 1 (ALS only).
    double approximation_factor = 1.0;
};

/// A realized m x n random projection G.
///
/// Matrix sketches (gaussian, rademacher) keep the dense realization; ROS keeps
/// its signs and selected rows so it can be applied with the fast transform;
/// subsampling sketches keep row indices (0-based) and per-row weights, so
/// row i of G is weights[i] * e_{indices[i]}^T.
template <typename Scalar>
struct SketchOperator {
    SketchKind kind = SketchKind::identity;
    Index m = 0;
    Index n = 0;
    std::uint64_t seed = 0;
    double lambda = 0.0;
    double approximation_factor = 1.0;

    Matrix<Scalar> dense;
    std::vector<Index> indices;
    Vector<Scalar> weights;
    Vector<Scalar> signs;
    // Sampling distribution over the full sample (ALS only).
    Vector<Scalar> probabilities;

    bool is_subsampling() const {
        return kind == SketchKind::nystrom_plain || kind == SketchKind::nystrom_als;
    }
};

/// Diagonal of K (K + lambda I)^{-1}.
template <typename Scalar>
struct LeverageScores {
    double lambda = 0.0;
    Vector<Scalar> scores;
    double approximation_factor = 1.0;
};

// ---------------------------------------------------------------------------
// Walsh-Hadamard transform

inline bool is_power_of_two(Index n) { return n > 0 && std::has_single_bit(static_cast<std::uint64_t>(n)); }

/// In-place unnormalized fast Walsh-Hadamard transform (Sylvester ordering).
template <typename Scalar>
void fwht(std::span<Scalar> v) {
    detail::require(is_power_of_two(static_cast<Index>(v.size())), "fwht: length must be a power of 2");
    for (std::size_t h = 1; h < v.size(); h *= 2) {
        for (std::size_t i = 0; i < v.size(); i += 2 * h) {
            for (std::size_t j = i; j < i + h; ++j) {
                const Scalar a = v[j];
                const Scalar b = v[j + h];
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
    }
}

/// Orthonormal transform H x with H^T H = I, applied to each column.
template <typename Scalar>
Matrix<Scalar> hadamard_transform(Matrix<Scalar> x) {
    const Scalar scale = Scalar(1) / std::sqrt(Scalar(x.rows()));
    for (Index j = 0; j < x.cols(); ++j)
        fwht(std::span<Scalar>(x.col(j).data(), static_cast<std::size_t>(x.rows())));
    return x * scale;
}

// ---------------------------------------------------------------------------
// Construction

namespace detail {

inline void check_sketch_size(Index m, Index n) {
    require(n >= 1, "sketch: sample size must be positive");
    require(m >= 1, "sketch: dimension m must be positive");
    require(m <= n, "sketch: dimension m must not exceed n");
}

template <typename Scalar>
SketchOperator<Scalar> blank_sketch(SketchKind kind, Index m, Index n, std::uint64_t seed) {
    SketchOperator<Scalar> op;
    op.kind = kind;
    op.m = m;
    op.n = n;
    op.seed = seed;
    return op;
}

// First m entries of a uniform random permutation of [0, n).
inline std::vector<Index> sample_without_replacement(Index m, Index n, CounterRng& rng) {
    std::vector<Index> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), Index(0));
    for (Index i = 0; i < m; ++i) {
        const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - i)));
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(m));
    return pool;
}

}  // namespace detail

template <typename Scalar = double>
SketchOperator<Scalar> make_gaussian(Index m, Index n, std::uint64_t seed) {
    detail::check_sketch_size(m, n);
    auto op = detail::blank_sketch<Scalar>(SketchKind::gaussian, m, n, seed);
    CounterRng rng(seed, Stream::gaussian_sketch);
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    op.dense.resize(m, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < m; ++i) op.dense(i, j) = static_cast<Scalar>(scale * rng.normal());
    return op;
}

template <typename Scalar = double>
SketchOperator<Scalar> make_rademacher(Index m, Index n, std::uint64_t seed) {
    detail::check_sketch_size(m, n);
    auto op = detail::blank_sketch<Scalar>(SketchKind::rademacher, m, n, seed);
    CounterRng rng(seed, Stream::rademacher_sketch);
    const Scalar scale = Scalar(1) / std::sqrt(Scalar(m));
    op.dense.resize(m, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < m; ++i) op.dense(i, j) = rng.coin() ? scale : -scale;
    return op;
}

/// G = sqrt(n/m) S H D: random column signs D, orthonormal Hadamard H and m
/// rows S chosen uniformly without replacement. n must be a power of 2.
template <typename Scalar = double>
SketchOperator<Scalar> make_ros(Index m, Index n, std::uint64_t seed) {
    detail::check_sketch_size(m, n);
    detail::require(is_power_of_two(n), "ros sketch: n must be a power of 2");
    auto op = detail::blank_sketch<Scalar>(SketchKind::ros, m, n, seed);
    CounterRng rng(seed, Stream::ros_sketch);
    op.signs.resize(n);
    for (Index j = 0; j < n; ++j) op.signs(j) = rng.coin() ? Scalar(1) : Scalar(-1);
    op.indices = detail::sample_without_replacement(m, n, rng);
    return op;
}

/// m distinct points chosen uniformly; weights sqrt(n/m) (uniform q_i = 1/n).
template <typename Scalar = double>
SketchOperator<Scalar> make_nystrom_plain(Index m, Index n, std::uint64_t seed) {
    detail::check_sketch_size(m, n);
    auto op = detail::blank_sketch<Scalar>(SketchKind::nystrom_plain, m, n, seed);
    CounterRng rng(seed, Stream::nystrom_plain);
    op.indices = detail::sample_without_replacement(m, n, rng);
    op.weights = Vector<Scalar>::Constant(m, std::sqrt(Scalar(n) / Scalar(m)));
    return op;
}

template <typename Scalar = double>
SketchOperator<Scalar> make_identity(Index n) {
    detail::check_sketch_size(n, n);
    auto op = detail::blank_sketch<Scalar>(SketchKind::identity, n, n, 0);
    return op;
}

template <typename Scalar>
LeverageScores<Scalar> leverage_scores(const GramMatrix<Scalar>& k, double lambda) {
    detail::require(lambda > 0.0, "leverage_scores: lambda must be positive");
    detail::require(k.rows() == k.cols(), "leverage_scores: Gram matrix must be square");
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(detail::symmetric_part(k.entries));
    const Vector<Scalar> sigma = eig.eigenvalues().cwiseMax(Scalar(0));
    const Vector<Scalar> filter =
        sigma.array() / (sigma.array() + static_cast<Scalar>(lambda));
    LeverageScores<Scalar> out;
    out.lambda = lambda;
    out.scores = eig.eigenvectors().array().square().matrix() * filter;
    return out;
}

/// Approximate-leverage-score subsampling: m i.i.d. indices drawn with
/// q_i proportional to an approximation of l_i(lambda); row weights
/// 1/sqrt(m q_i). With L > 1 each score is scaled by an independent factor
/// log-uniform on [1/L, L].
template <typename Scalar>
SketchOperator<Scalar> make_nystrom_als(const GramMatrix<Scalar>& k, Index m, double lambda,
                                        double approximation_factor, std::uint64_t seed) {
    const Index n = k.rows();
    detail::check_sketch_size(m, n);
    detail::require(lambda > 0.0, "nystrom_als: lambda must be positive");
    detail::require(approximation_factor >= 1.0, "nystrom_als: L must be >= 1");

    LeverageScores<Scalar> lev = leverage_scores(k, lambda);
    Vector<Scalar> approx = lev.scores;
    if (approximation_factor > 1.0) {
        CounterRng perturb(seed, Stream::als_perturbation);
        const double log_l = std::log(approximation_factor);
        for (Index i = 0; i < n; ++i)
            approx(i) *= static_cast<Scalar>(std::exp((2.0 * perturb.uniform() - 1.0) * log_l));
    }
    const Scalar total = approx.sum();
    if (!(total > Scalar(0)) || (approx.array() <= Scalar(0)).any())
        throw degenerate_problem("nystrom_als: leverage scores must be positive");

    auto op = detail::blank_sketch<Scalar>(SketchKind::nystrom_als, m, n, seed);
    op.lambda = lambda;
    op.approximation_factor = approximation_factor;
    op.probabilities = approx / total;

    std::vector<double> cumulative(static_cast<std::size_t>(n));
    double running = 0.0;
    for (Index i = 0; i < n; ++i) {
        running += static_cast<double>(op.probabilities(i));
        cumulative[static_cast<std::size_t>(i)] = running;
    }
    CounterRng rng(seed, Stream::nystrom_als);
    op.indices.resize(static_cast<std::size_t>(m));
    op.weights.resize(m);
    for (Index r = 0; r < m; ++r) {
        const double u = rng.uniform() * running;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        const Index i = std::min<Index>(it - cumulative.begin(), n - 1);
        op.indices[static_cast<std::size_t>(r)] = i;
        op.weights(r) = Scalar(1) / std::sqrt(Scalar(m) * op.probabilities(i));
    }
    return op;
}

/// Dispatches on params.kind. ALS needs the Gram matrix of the sample.
template <typename Scalar>
SketchOperator<Scalar> make_sketch(const SketchParams& params, Index n,
                                   const GramMatrix<Scalar>* k = nullptr) {
    switch (params.kind) {
        case SketchKind::gaussian: return make_gaussian<Scalar>(params.m, n, params.seed);
        case SketchKind::rademacher: return make_rademacher<Scalar>(params.m, n, params.seed);
        case SketchKind::ros: return make_ros<Scalar>(params.m, n, params.seed);
        case SketchKind::nystrom_plain: return make_nystrom_plain<Scalar>(params.m, n, params.seed);
        case SketchKind::nystrom_als:
            detail::require(k != nullptr, "nystrom_als: Gram matrix required");
            return make_nystrom_als(*k, params.m, params.lambda, params.approximation_factor,
                                    params.seed);
        case SketchKind::identity: return make_identity<Scalar>(n);
    }
    throw std::invalid_argument("make_sketch: unknown kind");
}

// ---------------------------------------------------------------------------
// Application

/// G * x for an n x k block x.
template <typename Scalar, typename Derived>
Matrix<Scalar> apply(const SketchOperator<Scalar>& op, const Eigen::MatrixBase<Derived>& x) {
    detail::require(x.rows() == op.n, "sketch apply: dimension mismatch");
    switch (op.kind) {
        case SketchKind::identity: return x;
        case SketchKind::gaussian:
        case SketchKind::rademacher: return op.dense * x;
        case SketchKind::ros: {
            Matrix<Scalar> work = op.signs.asDiagonal() * x;
            for (Index j = 0; j < work.cols(); ++j)
                fwht(std::span<Scalar>(work.col(j).data(), static_cast<std::size_t>(op.n)));
            const Scalar scale = Scalar(1) / std::sqrt(Scalar(op.m));
            Matrix<Scalar> out(op.m, x.cols());
            for (Index i = 0; i < op.m; ++i)
                out.row(i) = scale * work.row(op.indices[static_cast<std::size_t>(i)]);
            return out;
        }
        case SketchKind::nystrom_plain:
        case SketchKind::nystrom_als: {
            Matrix<Scalar> out(op.m, x.cols());
            for (Index i = 0; i < op.m; ++i)
                out.row(i) = op.weights(i) * x.row(op.indices[static_cast<std::size_t>(i)]);
            return out;
        }
    }
    throw std::invalid_argument("sketch apply: unknown kind");
}

/// G^T * x for an m x k block x.
template <typename Scalar, typename Derived>
Matrix<Scalar> apply_transpose(const SketchOperator<Scalar>& op,
                               const Eigen::MatrixBase<Derived>& x) {
    detail::require(x.rows() == op.m, "sketch apply_transpose: dimension mismatch");
    switch (op.kind) {
        case SketchKind::identity: return x;
        case SketchKind::gaussian:
        case SketchKind::rademacher: return op.dense.transpose() * x;
        case SketchKind::ros: {
            Matrix<Scalar> work = Matrix<Scalar>::Zero(op.n, x.cols());
            for (Index i = 0; i < op.m; ++i) work.row(op.indices[static_cast<std::size_t>(i)]) = x.row(i);
            for (Index j = 0; j < work.cols(); ++j)
                fwht(std::span<Scalar>(work.col(j).data(), static_cast<std::size_t>(op.n)));
            return (Scalar(1) / std::sqrt(Scalar(op.m))) * (op.signs.asDiagonal() * work);
        }
        case SketchKind::nystrom_plain:
        case SketchKind::nystrom_als: {
            Matrix<Scalar> out = Matrix<Scalar>::Zero(op.n, x.cols());
            for (Index i = 0; i < op.m; ++i)
                out.row(op.indices[static_cast<std::size_t>(i)]) += op.weights(i) * x.row(i);
            return out;
        }
    }
    throw std::invalid_argument("sketch apply_transpose: unknown kind");
}

template <typename Scalar>
Matrix<Scalar> to_dense(const SketchOperator<Scalar>& op) {
    return apply(op, Matrix<Scalar>::Identity(op.n, op.n));
}

}  // namespace kcgm
