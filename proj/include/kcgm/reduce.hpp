#pragma once

#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "kcgm/core.hpp"
#include "kcgm/kernel.hpp"
#include "kcgm/sketch.hpp"

namespace kcgm {

enum class Variant { sketched, nystrom, classic };

inline std::string to_string(Variant v) {
    switch (v) {
        case Variant::sketched: return "sketched";
        case Variant::nystrom: return "nystrom";
        case Variant::classic: return "classic";
    }
    return "unknown";
}

inline Variant parse_variant(std::string_view name) {
    for (auto v : {Variant::sketched, Variant::nystrom, Variant::classic})
        if (name == to_string(v)) return v;
    throw std::invalid_argument("unknown variant: " + std::string(name));
}

/// Maps a reduced solution a to predictor coefficients c over anchor points:
/// c = map * a (or c = a when `identity`), and the predictor is
/// f(x) = scale * sum_i c_i k(anchor_i, x).
template <typename Scalar>
struct BackMap {
    std::vector<Index> anchors;
    Matrix<Scalar> map;
    bool identity = false;
    Scalar scale = 1;

    template <typename Derived>
    Matrix<Scalar> coefficients(const Eigen::MatrixBase<Derived>& a) const {
        if (identity) return a;
        return map * a;
    }
};

/// Whitened finite-dimensional form of projected KCGM. Iterates solve
/// a_t = argmin over K_t(k_tilde, b) of the residual norm (Euclidean for
/// sketched/nystrom, k_tilde-weighted for classic).
template <typename Scalar>
struct ReducedProblem {
    Variant variant = Variant::classic;
    Matrix<Scalar> k_tilde;
    Vector<Scalar> b;
    // R with R R^T = (Q^* Q)^dagger; empty for classic.
    Matrix<Scalar> whitening;
    // C = S_x Q R, so that C C^T = S_x P S_x^*; empty for classic.
    Matrix<Scalar> sample_factor;
    BackMap<Scalar> back_map;

    Index rank() const { return k_tilde.rows(); }
};

/// R (m x r) with R R^T = M^dagger, via R = V_r diag(lambda_r)^{-1/2}.
/// Eigenvalues below rank_tolerance() * lambda_max count as zero; a zero M
/// gives an m x 0 result.
template <typename Derived>
Matrix<typename Derived::Scalar> whitening_factor(const Eigen::MatrixBase<Derived>& m) {
    using Scalar = typename Derived::Scalar;
    detail::require(m.rows() == m.cols(), "whitening_factor: matrix must be square");
    const Matrix<Scalar> sym = detail::symmetric_part(m);
    detail::require((sym - m).norm() <= detail::symmetry_tolerance(Scalar(1e-8)) * std::max(m.norm(), Scalar(1)),
                    "whitening_factor: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(sym);
    const auto& values = eig.eigenvalues();
    const Scalar top = values.size() > 0 ? values.maxCoeff() : Scalar(0);
    if (!(top > Scalar(0))) return Matrix<Scalar>(m.rows(), 0);
    const Scalar cut = detail::rank_tolerance<Scalar>() * top;
    std::vector<Index> kept;
    for (Index i = values.size() - 1; i >= 0; --i)
        if (values(i) > cut) kept.push_back(i);
    Matrix<Scalar> r(m.rows(), static_cast<Index>(kept.size()));
    for (Index j = 0; j < r.cols(); ++j) {
        const Index i = kept[static_cast<std::size_t>(j)];
        r.col(j) = eig.eigenvectors().col(i) / std::sqrt(values(i));
    }
    return r;
}

namespace detail {

template <typename Scalar, typename Derived>
void finish_projected(ReducedProblem<Scalar>& p, const Eigen::MatrixBase<Derived>& y_bar) {
    if (p.whitening.cols() == 0) throw degenerate_problem("reduction has rank zero");
    p.k_tilde = symmetric_part(p.sample_factor.transpose() * p.sample_factor);
    p.b = p.sample_factor.transpose() * y_bar;
}

}  // namespace detail

/// Sketched reduction: R R^T = (G K G^T)^dagger, k_tilde = R^T G K^2 G^T R,
/// b = R^T G K y_bar, coefficients G^T R a over the full sample with scale 1/sqrt(n).
template <typename Scalar, typename Derived>
ReducedProblem<Scalar> reduce_sketched(const GramMatrix<Scalar>& k, const SketchOperator<Scalar>& g,
                                       const Eigen::MatrixBase<Derived>& y_bar) {
    const Index n = k.rows();
    detail::require(k.cols() == n, "reduce_sketched: Gram matrix must be square");
    detail::require(g.n == n, "reduce_sketched: sketch does not match sample size");
    detail::require(y_bar.size() == n, "reduce_sketched: response length mismatch");

    ReducedProblem<Scalar> p;
    p.variant = Variant::sketched;
    const Matrix<Scalar> gk = apply(g, k.entries);          // m x n
    const Matrix<Scalar> gk_t = gk.transpose();             // K G^T
    p.whitening = whitening_factor(apply(g, gk_t));         // G K G^T
    p.sample_factor = gk_t * p.whitening;                   // K G^T R
    detail::finish_projected(p, y_bar);

    p.back_map.anchors.resize(static_cast<std::size_t>(n));
    std::iota(p.back_map.anchors.begin(), p.back_map.anchors.end(), Index(0));
    p.back_map.map = apply_transpose(g, p.whitening);
    p.back_map.scale = Scalar(1) / std::sqrt(Scalar(n));
    return p;
}

/// Nystrom reduction on a subsample x~ (given by `anchors` into the sample):
/// R R^T = K_{x~x~}^dagger, k_tilde = R^T K_{x~x} K_{xx~} R,
/// b = R^T K_{x~x} y_bar, coefficients R a over x~ with scale 1/sqrt(m).
/// Repeated anchors are kept as separate terms.
template <typename Scalar, typename Derived>
ReducedProblem<Scalar> reduce_nystrom(const GramMatrix<Scalar>& k_mx, const GramMatrix<Scalar>& k_mm,
                                      const Eigen::MatrixBase<Derived>& y_bar,
                                      std::vector<Index> anchors) {
    const Index m = k_mm.rows();
    detail::require(k_mm.cols() == m && k_mx.rows() == m, "reduce_nystrom: inconsistent subsample Gram");
    detail::require(k_mx.cols() == y_bar.size(), "reduce_nystrom: response length mismatch");
    detail::require(static_cast<Index>(anchors.size()) == m, "reduce_nystrom: anchor count mismatch");
    for (Index i : anchors)
        detail::require(i >= 0 && i < k_mx.cols(), "reduce_nystrom: anchor index out of range");

    ReducedProblem<Scalar> p;
    p.variant = Variant::nystrom;
    p.whitening = whitening_factor(k_mm.entries);
    p.sample_factor = k_mx.entries.transpose() * p.whitening;   // K_{xx~} R
    detail::finish_projected(p, y_bar);

    p.back_map.anchors = std::move(anchors);
    p.back_map.map = p.whitening;
    p.back_map.scale = Scalar(1) / std::sqrt(Scalar(m));
    return p;
}

/// Non-sketched problem: k_tilde = K, b = y_bar, identity back map.
template <typename Scalar, typename Derived>
ReducedProblem<Scalar> reduce_classic(const GramMatrix<Scalar>& k, const Eigen::MatrixBase<Derived>& y_bar) {
    const Index n = k.rows();
    detail::require(k.cols() == n, "reduce_classic: Gram matrix must be square");
    detail::require(y_bar.size() == n, "reduce_classic: response length mismatch");
    ReducedProblem<Scalar> p;
    p.variant = Variant::classic;
    p.k_tilde = k.entries;
    p.b = y_bar;
    p.back_map.anchors.resize(static_cast<std::size_t>(n));
    std::iota(p.back_map.anchors.begin(), p.back_map.anchors.end(), Index(0));
    p.back_map.identity = true;
    p.back_map.scale = Scalar(1) / std::sqrt(Scalar(n));
    return p;
}

/// Residual norm minimized by the solver for this variant; equals the
/// H-norm residual of the projected iteration.
template <typename Scalar, typename Derived>
Scalar reduced_residual(const ReducedProblem<Scalar>& p, const Eigen::MatrixBase<Derived>& a) {
    const Vector<Scalar> r = p.k_tilde * a - p.b;
    if (p.variant == Variant::classic) return std::sqrt(std::max(Scalar(0), r.dot(p.k_tilde * r)));
    return r.norm();
}

}  // namespace kcgm
