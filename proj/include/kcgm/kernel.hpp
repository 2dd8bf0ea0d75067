#pragma once

#include <cmath>
#include <string>
#include <type_traits>

#include <Eigen/Eigenvalues>

#include "kcgm/core.hpp"

namespace kcgm {

enum class KernelFamily { sobolev_first_order, gaussian, linear };

/// A bounded positive-definite kernel. `kappa_sq` bounds k(x, x) on the
/// kernel's domain and is fixed by the family except for the linear kernel.
struct KernelSpec {
    KernelFamily family = KernelFamily::sobolev_first_order;
    double bandwidth = 1.0;
    double kappa_sq = 2.0;

    // k(x, x') = 1 + min(x, x') on [0, 1].
    static KernelSpec sobolev() { return {KernelFamily::sobolev_first_order, 1.0, 2.0}; }

    // k(x, x') = exp(-|x - x'|^2 / (2 sigma^2)).
    static KernelSpec gaussian(double sigma) {
        detail::require(sigma > 0.0, "gaussian kernel: bandwidth must be positive");
        return {KernelFamily::gaussian, sigma, 1.0};
    }

    // k(x, x') = <x, x'>; the caller vouches for sup k(x, x) <= kappa_sq.
    static KernelSpec linear(double kappa_sq) {
        detail::require(kappa_sq > 0.0, "linear kernel: kappa_sq must be positive");
        return {KernelFamily::linear, 1.0, kappa_sq};
    }
};

inline std::string to_string(KernelFamily family) {
    switch (family) {
        case KernelFamily::sobolev_first_order: return "sobolev";
        case KernelFamily::gaussian: return "gaussian";
        case KernelFamily::linear: return "linear";
    }
    return "unknown";
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar eval_kernel(const KernelSpec& spec, const Eigen::MatrixBase<DerivedA>& x,
                                      const Eigen::MatrixBase<DerivedB>& x_prime) {
    using Scalar = typename DerivedA::Scalar;
    detail::require(x.size() == x_prime.size(), "eval_kernel: dimension mismatch");
    switch (spec.family) {
        case KernelFamily::sobolev_first_order: {
            detail::require(x.size() == 1, "sobolev kernel: inputs must be scalars");
            const Scalar a = x(0);
            const Scalar b = x_prime(0);
            detail::require(a >= Scalar(0) && a <= Scalar(1) && b >= Scalar(0) && b <= Scalar(1),
                            "sobolev kernel: input outside [0, 1]");
            return Scalar(1) + std::min(a, b);
        }
        case KernelFamily::gaussian: {
            const Scalar sq = (x - x_prime).squaredNorm();
            return std::exp(-sq / Scalar(2 * spec.bandwidth * spec.bandwidth));
        }
        case KernelFamily::linear: return x.dot(x_prime);
    }
    throw std::invalid_argument("eval_kernel: unknown kernel family");
}

template <typename Scalar>
    requires std::is_floating_point_v<Scalar>
Scalar eval_kernel(const KernelSpec& spec, Scalar x, Scalar x_prime) {
    return eval_kernel(spec, Vector<Scalar>::Constant(1, x), Vector<Scalar>::Constant(1, x_prime));
}

/// Kernel matrix between two point sets (points are rows), normalized by
/// 1/sqrt(|rows| |cols|) so that K_xx = S_x S_x^*.
template <typename Scalar>
struct GramMatrix {
    Matrix<Scalar> entries;
    // True when rows and cols are the same point set.
    bool same_points = false;

    Index rows() const { return entries.rows(); }
    Index cols() const { return entries.cols(); }
};

namespace detail {

template <typename Scalar, typename DerivedA, typename DerivedB>
void kernel_block(const KernelSpec& spec, const Eigen::MatrixBase<DerivedA>& rows,
                  const Eigen::MatrixBase<DerivedB>& cols, Index first_col, Index last_col,
                  Scalar scale, Matrix<Scalar>& out) {
    const bool scalar_sobolev = spec.family == KernelFamily::sobolev_first_order;
    for (Index j = first_col; j < last_col; ++j) {
        if (scalar_sobolev) {
            const Scalar b = cols(j, 0);
            for (Index i = 0; i < rows.rows(); ++i)
                out(i, j) = scale * (Scalar(1) + std::min(rows(i, 0), b));
        } else {
            for (Index i = 0; i < rows.rows(); ++i)
                out(i, j) = scale * eval_kernel(spec, rows.row(i), cols.row(j));
        }
    }
}

template <typename Derived>
void check_domain(const KernelSpec& spec, const Eigen::MatrixBase<Derived>& points) {
    if (spec.family != KernelFamily::sobolev_first_order) return;
    require(points.cols() == 1, "sobolev kernel: inputs must be scalars");
    require((points.array() >= 0).all() && (points.array() <= 1).all(),
            "sobolev kernel: input outside [0, 1]");
}

}  // namespace detail

/// Unnormalized kernel matrix [k(rows_i, cols_j)], column-blocked.
template <typename DerivedA, typename DerivedB>
Matrix<typename DerivedA::Scalar> kernel_matrix(const KernelSpec& spec,
                                                const Eigen::MatrixBase<DerivedA>& rows,
                                                const Eigen::MatrixBase<DerivedB>& cols,
                                                typename DerivedA::Scalar scale = 1) {
    using Scalar = typename DerivedA::Scalar;
    detail::require(rows.rows() > 0 && cols.rows() > 0, "gram: empty point set");
    detail::require(rows.cols() == cols.cols(), "gram: point dimension mismatch");
    detail::check_domain(spec, rows);
    detail::check_domain(spec, cols);
    constexpr Index block = 64;
    Matrix<Scalar> out(rows.rows(), cols.rows());
    for (Index start = 0; start < cols.rows(); start += block)
        detail::kernel_block(spec, rows, cols, start, std::min(start + block, cols.rows()), scale,
                             out);
    return out;
}

template <typename DerivedA, typename DerivedB>
GramMatrix<typename DerivedA::Scalar> gram(const KernelSpec& spec,
                                           const Eigen::MatrixBase<DerivedA>& rows,
                                           const Eigen::MatrixBase<DerivedB>& cols) {
    using Scalar = typename DerivedA::Scalar;
    const Scalar scale = Scalar(1) / std::sqrt(Scalar(rows.rows()) * Scalar(cols.rows()));
    GramMatrix<Scalar> g{kernel_matrix(spec, rows, cols, scale), false};
    return g;
}

template <typename Derived>
GramMatrix<typename Derived::Scalar> gram(const KernelSpec& spec,
                                          const Eigen::MatrixBase<Derived>& points) {
    auto g = gram(spec, points, points);
    g.same_points = true;
    return g;
}

/// Throws if some k(x, x) exceeds the kernel's bound kappa_sq.
template <typename Derived>
void check_bounded(const KernelSpec& spec, const Eigen::MatrixBase<Derived>& points) {
    using Scalar = typename Derived::Scalar;
    detail::check_domain(spec, points);
    const Scalar slack = Scalar(spec.kappa_sq) * 64 * std::numeric_limits<Scalar>::epsilon();
    for (Index i = 0; i < points.rows(); ++i) {
        const Scalar diag = eval_kernel(spec, points.row(i), points.row(i));
        detail::require(diag <= Scalar(spec.kappa_sq) + slack,
                        "kernel bound violated: k(x, x) > kappa_sq");
    }
}

/// Symmetric and min eigenvalue >= -tol * max eigenvalue.
template <typename Scalar>
bool is_symmetric_psd(const Matrix<Scalar>& m, Scalar tol = Scalar(1e-8)) {
    if (m.rows() != m.cols()) return false;
    if (m != m.transpose()) return false;
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(m, Eigen::EigenvaluesOnly);
    const Scalar top = eig.eigenvalues().maxCoeff();
    return eig.eigenvalues().minCoeff() >= -tol * std::max(top, Scalar(0));
}

}  // namespace kcgm
