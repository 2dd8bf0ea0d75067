#include "kcgm/harness/data.hpp"

#include <cmath>

#include "kcgm/rng.hpp"

namespace kcgm::harness {

double regression_target(double x) { return std::abs(x - 0.5) - 0.5; }

Dataset<double> generate_data(Index n, std::uint64_t seed, double noise_sd) {
    detail::require(n >= 1, "generate_data: n must be positive");
    detail::require(noise_sd >= 0.0, "generate_data: noise_sd must be non-negative");
    CounterRng rng(seed, Stream::data);
    Dataset<double> data;
    data.x.resize(n, 1);
    data.y.resize(n);
    for (Index i = 0; i < n; ++i) {
        const double x = rng.uniform();
        data.x(i, 0) = x;
        data.y(i) = regression_target(x) + noise_sd * rng.normal();
    }
    return data;
}

Matrix<double> midpoint_grid(Index points) {
    detail::require(points >= 1, "midpoint_grid: need at least one point");
    Matrix<double> grid(points, 1);
    for (Index j = 0; j < points; ++j) grid(j, 0) = (static_cast<double>(j) + 0.5) / static_cast<double>(points);
    return grid;
}

double prediction_error(const Predictor<double>& predictor, Index quadrature_points) {
    detail::require(quadrature_points >= 64, "prediction_error: need at least 64 quadrature points");
    const Matrix<double> grid = midpoint_grid(quadrature_points);
    const Vector<double> fitted = predictor.predict(grid);
    double sum = 0.0;
    for (Index j = 0; j < quadrature_points; ++j) {
        const double diff = fitted(j) - regression_target(grid(j, 0));
        sum += diff * diff;
    }
    return sum / static_cast<double>(quadrature_points);
}

double training_error(const Predictor<double>& predictor, const Dataset<double>& data) {
    const Vector<double> fitted = predictor.predict(data.x);
    return (fitted - data.y).squaredNorm() / static_cast<double>(data.size());
}

}  // namespace kcgm::harness
