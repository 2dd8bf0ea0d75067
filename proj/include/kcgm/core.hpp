#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace kcgm {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

// Raised when a reduction or solve has no usable directions (rank zero).
class degenerate_problem : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
    if (!condition) throw std::invalid_argument(message);
}

// Relative eigenvalue cut-off used for pseudo-inverses and rank decisions.
template <typename Scalar>
constexpr Scalar rank_tolerance() {
    return std::max(Scalar(1e-10), Scalar(64) * std::numeric_limits<Scalar>::epsilon());
}

// Relative asymmetry accepted from callers that form M = G K G^T and the like.
template <typename Scalar>
constexpr Scalar symmetry_tolerance(Scalar floor) {
    return std::max(floor, Scalar(1024) * std::numeric_limits<Scalar>::epsilon());
}

template <typename Derived>
Matrix<typename Derived::Scalar> symmetric_part(const Eigen::MatrixBase<Derived>& m) {
    using Scalar = typename Derived::Scalar;
    return Scalar(0.5) * (m + m.transpose());
}

}  // namespace detail
}  // namespace kcgm
