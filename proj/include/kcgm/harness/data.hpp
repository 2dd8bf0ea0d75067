#pragma once

#include <cstdint>

#include "kcgm/solver.hpp"

namespace kcgm::harness {

// f(x) = |x - 1/2| - 1/2 on [0, 1].
double regression_target(double x);

/// x_i ~ U[0, 1], y_i = f(x_i) + noise_sd * N(0, 1); a pure function of (n, seed).
Dataset<double> generate_data(Index n, std::uint64_t seed, double noise_sd = 1.0);

// Midpoints (j - 1/2) / N, j = 1..N, as an N x 1 matrix.
Matrix<double> midpoint_grid(Index points);

/// Squared L2(U[0,1]) distance to the regression target by midpoint quadrature.
double prediction_error(const Predictor<double>& predictor, Index quadrature_points = 2048);

/// (1/n) sum_i (fhat(x_i) - y_i)^2.
double training_error(const Predictor<double>& predictor, const Dataset<double>& data);

}  // namespace kcgm::harness
