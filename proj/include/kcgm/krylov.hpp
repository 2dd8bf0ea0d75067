#pragma once

#include <optional>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "kcgm/core.hpp"

namespace kcgm {

enum class ResidualNorm { euclidean, weighted };

/// Orthonormal basis of K_t(A, b) built by Lanczos with full
/// reorthogonalization, plus the projected matrix
/// A V_t = V_{t+1} projected (Hessenberg, (t+1) x t while the space grows).
template <typename Scalar>
class KrylovBasis {
public:
    // Growth stops once the new direction keeps less than this fraction of ||A v_t||.
    static constexpr double stagnation_tolerance = 1e-12;

    template <typename DerivedA, typename DerivedB>
    KrylovBasis(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b)
        : a_(a), beta0_(b.norm()) {
        detail::require(a_.rows() == a_.cols(), "krylov: matrix must be square");
        detail::require(b.size() == a_.rows(), "krylov: right-hand side length mismatch");
        vectors_.resize(a_.rows(), 0);
        if (beta0_ > Scalar(0)) {
            append(b / beta0_);
        } else {
            stagnated_ = true;
        }
    }

    /// Adds v_{t+1}; returns false (and marks stagnation) if the space stopped growing.
    bool extend() {
        if (stagnated_) return false;
        const Index t = size();
        if (t == a_.rows()) {
            stagnated_ = true;
            ensure_image(t - 1);
            projected_.conservativeResize(t, t);
            projected_.col(t - 1) = vectors_.transpose() * images_.col(t - 1);
            grew_.push_back(false);
            return false;
        }
        ensure_image(t - 1);
        Vector<Scalar> w = images_.col(t - 1);
        const Scalar scale = w.norm();
        Vector<Scalar> h = vectors_.transpose() * w;
        w -= vectors_ * h;
        const Vector<Scalar> h2 = vectors_.transpose() * w;
        w -= vectors_ * h2;
        h += h2;
        const Scalar beta = w.norm();
        const bool grows = scale > Scalar(0) && beta > Scalar(stagnation_tolerance) * scale;
        projected_.conservativeResize(grows ? t + 1 : t, t);
        projected_.col(t - 1).setZero();
        projected_.col(t - 1).head(t) = h;
        if (grows) {
            projected_.row(t).setZero();
            projected_(t, t - 1) = beta;
            append(w / beta);
        } else {
            stagnated_ = true;
        }
        grew_.push_back(grows);
        return grows;
    }

    Index size() const { return vectors_.cols(); }
    bool stagnated() const { return stagnated_; }
    Scalar rhs_norm() const { return beta0_; }
    const Matrix<Scalar>& vectors() const { return vectors_; }
    // Columns 1..t of the Hessenberg matrix, rows 1..min(t+1, size()).
    Matrix<Scalar> projected(Index t) const {
        return projected_.topLeftCorner(std::min(t + 1, size()), t);
    }
    const std::vector<bool>& grew() const { return grew_; }

    /// A v_j, computed once and cached.
    Vector<Scalar> image(Index j) {
        ensure_image(j);
        return images_.col(j);
    }

    /// V_k^T A V_k for the first k basis vectors.
    Matrix<Scalar> restriction(Index k) {
        for (Index j = 0; j < k; ++j) ensure_image(j);
        return detail::symmetric_part(vectors_.leftCols(k).transpose() * images_.leftCols(k));
    }

private:
    void append(const Vector<Scalar>& v) {
        vectors_.conservativeResize(Eigen::NoChange, vectors_.cols() + 1);
        vectors_.col(vectors_.cols() - 1) = v;
    }

    void ensure_image(Index j) {
        while (images_.cols() <= j) {
            const Index next = images_.cols();
            images_.conservativeResize(a_.rows(), next + 1);
            images_.col(next) = a_ * vectors_.col(next);
        }
    }

    Matrix<Scalar> a_;
    Scalar beta0_;
    Matrix<Scalar> vectors_;
    Matrix<Scalar> images_;
    Matrix<Scalar> projected_;
    std::vector<bool> grew_;
    bool stagnated_ = false;
};

/// Iterates a_1..a_T and their residual norms. Once the Krylov space stops
/// growing (at stagnated_at) later iterates repeat the last one.
template <typename Scalar>
struct SolveTrace {
    std::vector<Vector<Scalar>> iterates;
    std::vector<Scalar> residuals;
    std::optional<Index> stagnated_at;
    // b = 0: no iterates, the solution is a_0 = 0.
    bool trivial = false;

    Index size() const { return static_cast<Index>(iterates.size()); }
};

template <typename Derived>
typename Derived::Scalar residual_norm(const Matrix<typename Derived::Scalar>& a,
                                       const Vector<typename Derived::Scalar>& b,
                                       const Eigen::MatrixBase<Derived>& x, ResidualNorm norm) {
    using Scalar = typename Derived::Scalar;
    const Vector<Scalar> r = a * x - b;
    if (norm == ResidualNorm::euclidean) return r.norm();
    return std::sqrt(std::max(Scalar(0), r.dot(a * r)));
}

namespace detail {

template <typename Scalar>
Matrix<Scalar> psd_sqrt_factor(const Matrix<Scalar>& t) {
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(t);
    const Vector<Scalar> root = eig.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt();
    return root.asDiagonal() * eig.eigenvectors().transpose();
}

template <typename Scalar, typename DerivedA, typename DerivedB>
SolveTrace<Scalar> krylov_solve(const Eigen::MatrixBase<DerivedA>& a_in,
                                const Eigen::MatrixBase<DerivedB>& b_in, Index t_max, ResidualNorm norm) {
    detail::require(t_max >= 1, "krylov: t_max must be at least 1");
    const Matrix<Scalar> a = a_in;
    const Vector<Scalar> b = b_in;
    detail::require((a - a.transpose()).norm() <= detail::symmetry_tolerance(Scalar(1e-10)) * std::max(a.norm(), Scalar(1)),
                    "krylov: matrix is not symmetric");

    SolveTrace<Scalar> trace;
    KrylovBasis<Scalar> basis(a, b);
    if (basis.size() == 0) {
        trace.trivial = true;
        return trace;
    }
    // The least-squares problem is posed on explicitly computed images A v_j
    // (premultiplied by a square root of A for the weighted norm) rather than
    // on the Hessenberg matrix, which loses accuracy once the basis nearly
    // stops growing.
    Matrix<Scalar> root;
    Vector<Scalar> target = b;
    if (norm == ResidualNorm::weighted) {
        root = psd_sqrt_factor(detail::symmetric_part(a));
        target = root * b;
    }
    Matrix<Scalar> columns(a.rows(), 0);
    for (Index t = 1; t <= t_max; ++t) {
        if (t > basis.size()) {
            trace.iterates.push_back(trace.iterates.back());
            trace.residuals.push_back(trace.residuals.back());
            continue;
        }
        if (basis.size() == t && !basis.stagnated()) basis.extend();
        if (basis.stagnated() && !trace.stagnated_at) trace.stagnated_at = basis.size();

        columns.conservativeResize(Eigen::NoChange, t);
        columns.col(t - 1) = norm == ResidualNorm::weighted ? Vector<Scalar>(root * basis.image(t - 1))
                                                            : basis.image(t - 1);
        const Vector<Scalar> y = columns.completeOrthogonalDecomposition().solve(target);
        Vector<Scalar> x = basis.vectors().leftCols(t) * y;
        const Scalar r = residual_norm(a, b, x, norm);
        // K_{t-1} is contained in K_t, so a rounding-level increase means the
        // previous iterate is at least as good.
        if (t > 1 && r > trace.residuals.back()) {
            trace.iterates.push_back(trace.iterates.back());
            trace.residuals.push_back(trace.residuals.back());
            continue;
        }
        trace.residuals.push_back(r);
        trace.iterates.push_back(std::move(x));
    }
    return trace;
}

}  // namespace detail

/// a_t = argmin over K_t(A, b) of ||A a - b||_2 for t = 1..t_max.
template <typename DerivedA, typename DerivedB>
SolveTrace<typename DerivedA::Scalar> krylov_minres(const Eigen::MatrixBase<DerivedA>& a,
                                                    const Eigen::MatrixBase<DerivedB>& b, Index t_max) {
    return detail::krylov_solve<typename DerivedA::Scalar>(a, b, t_max, ResidualNorm::euclidean);
}

/// a_t = argmin over K_t(A, b) of sqrt((A a - b)^T A (A a - b)) for t = 1..t_max.
template <typename DerivedA, typename DerivedB>
SolveTrace<typename DerivedA::Scalar> krylov_weighted(const Eigen::MatrixBase<DerivedA>& a,
                                                      const Eigen::MatrixBase<DerivedB>& b, Index t_max) {
    return detail::krylov_solve<typename DerivedA::Scalar>(a, b, t_max, ResidualNorm::weighted);
}

template <typename Scalar>
struct OracleSolution {
    Vector<Scalar> a;
    Scalar residual = 0;
    // Dimension of the surviving power basis; < t when the space collapsed.
    Index dimension = 0;
    bool stagnated = false;
};

/// Reference solution from the raw power basis [b, Ab, ..., A^{t-1} b]:
/// orthonormalize with column-pivoted QR, then solve the projected least
/// squares problem densely. Independent of the Lanczos path; intended for
/// small problems only.
template <typename DerivedA, typename DerivedB>
OracleSolution<typename DerivedA::Scalar> brute_force_polynomial_oracle(
    const Eigen::MatrixBase<DerivedA>& a_in, const Eigen::MatrixBase<DerivedB>& b_in, Index t,
    ResidualNorm norm = ResidualNorm::euclidean) {
    using Scalar = typename DerivedA::Scalar;
    detail::require(t >= 1, "oracle: t must be at least 1");
    const Matrix<Scalar> a = a_in;
    const Vector<Scalar> b = b_in;
    const Index dim = a.rows();

    OracleSolution<Scalar> out;
    out.a = Vector<Scalar>::Zero(dim);
    if (b.norm() == Scalar(0)) {
        out.residual = 0;
        out.stagnated = true;
        return out;
    }
    // Columns are rescaled to unit length; only their span matters.
    Matrix<Scalar> powers(dim, t);
    Vector<Scalar> p = b / b.norm();
    for (Index j = 0; j < t; ++j) {
        powers.col(j) = p;
        p = a * p;
        const Scalar len = p.norm();
        if (len > Scalar(0)) p /= len;
    }
    Eigen::ColPivHouseholderQR<Matrix<Scalar>> qr(powers);
    qr.setThreshold(Scalar(1e-10));
    const Index rank = qr.rank();
    out.dimension = rank;
    out.stagnated = rank < t;
    if (rank == 0) {
        out.residual = residual_norm(a, b, out.a, norm);
        return out;
    }
    const Matrix<Scalar> q = Matrix<Scalar>(qr.householderQ()).leftCols(rank);

    Matrix<Scalar> lhs = a * q;
    Vector<Scalar> rhs = b;
    if (norm == ResidualNorm::weighted) {
        const Matrix<Scalar> root = detail::psd_sqrt_factor(detail::symmetric_part(a));
        lhs = root * lhs;
        rhs = root * rhs;
    }
    const Vector<Scalar> y = lhs.completeOrthogonalDecomposition().solve(rhs);
    out.a = q * y;
    out.residual = residual_norm(a, b, out.a, norm);
    return out;
}

}  // namespace kcgm
