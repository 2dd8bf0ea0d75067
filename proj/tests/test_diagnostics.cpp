#include <doctest.h>

#include <algorithm>
#include <random>

#include "kcgm/diagnostics.hpp"
#include "kcgm/sketch.hpp"
#include "oracles.hpp"

using namespace kcgm;

namespace {

std::vector<double> unit_grid(int n) {
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = (i + 0.5) / n;
    return x;
}

double lambda_max(const Matrix<double>& m) {
    return Eigen::SelfAdjointEigenSolver<Matrix<double>>(m, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

}  // namespace

TEST_CASE("effective dimension") {
    GramMatrix<double> k{Matrix<double>::Zero(2, 2), true};
    k.entries(0, 0) = 1.0;
    k.entries(1, 1) = 0.1;
    CHECK(effective_dimension(k, 0.1) == doctest::Approx(1.0 / 1.1 + 0.5).epsilon(1e-14));
    CHECK(effective_dimension(k, 0.1) == doctest::Approx(1.4091).epsilon(1e-4));
    CHECK(effective_dimension(k, 1e12) < 1e-11);
    CHECK(effective_dimension(k, 1e-14) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS_AS(effective_dimension(k, 0.0), std::invalid_argument);

    const auto x = unit_grid(128);
    GramMatrix<double> g{oracle::sobolev_gram(x, x), true};
    double prev = 1e300, prev_scaled = 0.0;
    for (int e = -8; e <= 2; ++e) {
        const double lambda = std::pow(10.0, e);
        const double d = effective_dimension(g, lambda);
        CHECK(d > 0.0);
        CHECK(d <= 128.0);
        CHECK(d <= prev);
        CHECK(d * lambda >= prev_scaled);
        prev = d;
        prev_scaled = d * lambda;
        const double lev = leverage_scores(g, lambda).scores.sum();
        CHECK(std::abs(lev - d) <= 1e-10 * d);
    }
}

TEST_CASE("projection error edge cases") {
    const auto x = unit_grid(64);
    GramMatrix<double> k{oracle::sobolev_gram(x, x), true};
    Vector<double> y = Vector<double>::Ones(64);

    CHECK(projection_error(k, Matrix<double>(64, 0)) == doctest::Approx(lambda_max(k.entries)).epsilon(1e-12));

    const auto full = reduce_sketched(k, make_identity<double>(64), y);
    CHECK(projection_error(k, full) <= 1e-10);

    std::vector<Index> all(64);
    for (Index i = 0; i < 64; ++i) all[static_cast<std::size_t>(i)] = i;
    const auto xm = oracle::column(x);
    const auto nys = reduce_nystrom(gram(KernelSpec::sobolev(), xm, xm), gram(KernelSpec::sobolev(), xm), y, all);
    CHECK(projection_error(k, nys) <= 1e-8);

    CHECK(projection_error(k, reduce_classic(k, y)) == 0.0);

    const auto part = reduce_sketched(k, make_gaussian(5, 64, 1), y);
    const double e = projection_error(k, part);
    CHECK(e >= 0.0);
    CHECK(e <= lambda_max(k.entries));
    // Independent evaluation through the projector.
    const Matrix<double> g = to_dense(make_gaussian(5, 64, 1));
    const Matrix<double> cct =
        k.entries * g.transpose() * oracle::pinv(g * k.entries * g.transpose()) * g * k.entries;
    CHECK(e == doctest::Approx(lambda_max(k.entries - cct)).epsilon(1e-8));

    CHECK_THROWS_AS(projection_error(k, Matrix<double>(10, 3)), std::invalid_argument);
}

TEST_CASE("projection error decreases with the sketch dimension") {
    const int n = 256;
    const auto x = unit_grid(n);
    const auto xm = oracle::column(x);
    GramMatrix<double> k{oracle::sobolev_gram(x, x), true};
    const Vector<double> y = Vector<double>::Ones(n);
    for (auto kind : {SketchKind::ros, SketchKind::nystrom_plain}) {
        double prev = 1e300;
        for (Index m : {4, 8, 16, 32}) {
            std::vector<double> errs;
            for (std::uint64_t seed = 0; seed < 20; ++seed) {
                if (kind == SketchKind::ros) {
                    errs.push_back(projection_error(k, reduce_sketched(k, make_ros(m, n, seed), y)));
                } else {
                    const auto g = make_nystrom_plain(m, n, seed);
                    Matrix<double> sub(m, 1);
                    for (Index i = 0; i < m; ++i) sub(i, 0) = x[static_cast<std::size_t>(g.indices[static_cast<std::size_t>(i)])];
                    const auto p = reduce_nystrom(gram(KernelSpec::sobolev(), sub, xm), gram(KernelSpec::sobolev(), sub), y,
                                                  g.indices);
                    errs.push_back(projection_error(k, p));
                }
            }
            std::nth_element(errs.begin(), errs.begin() + 10, errs.end());
            const double upper = errs[10];
            std::nth_element(errs.begin(), errs.begin() + 9, errs.end());
            const double median = 0.5 * (errs[9] + upper);
            CHECK(median <= prev);
            prev = median;
        }
    }
}

TEST_CASE("sketch dimension schedules") {
    CHECK(sketch_dimension_schedule(1024, 0.5, 0.5, ScheduleRegime::experiment_sketched) == 11);
    CHECK(sketch_dimension_schedule(1024, 0.5, 0.5, ScheduleRegime::experiment_nystrom) == 102);
    CHECK(sketch_dimension_schedule(1024, 0.5, 0.5, ScheduleRegime::sketched) == 11);

    const std::vector<std::tuple<Index, Index, Index>> table{
        {32, 4, 11}, {64, 4, 16}, {128, 6, 26}, {256, 7, 41}, {512, 8, 64}, {1024, 11, 102}};
    for (auto [n, ms, mn] : table) {
        CHECK(sketch_dimension_schedule(n, 0, 1, ScheduleRegime::experiment_sketched) == ms);
        CHECK(sketch_dimension_schedule(n, 0, 1, ScheduleRegime::experiment_nystrom) == mn);
    }
    // Exact cubes must not be pushed up by rounding.
    CHECK(sketch_dimension_schedule(27, 0, 1, ScheduleRegime::experiment_sketched) == 3);
    CHECK(sketch_dimension_schedule(1000, 0, 1, ScheduleRegime::experiment_nystrom) == 100);

    // zeta >= 1: n^{gamma zeta / (2 zeta + gamma)}; capacity <= 1: n^gamma with the log factor.
    CHECK(sketch_dimension_schedule(4096, 1.0, 1.0, ScheduleRegime::sketched) ==
          static_cast<Index>(std::ceil(std::pow(4096.0, 1.0 / 3.0) - 1e-9)));
    CHECK(sketch_dimension_schedule(1000, 0.0, 1.0, ScheduleRegime::sketched) ==
          static_cast<Index>(std::ceil(1000.0 / std::log(1000.0))));
    // Nystrom: n^{max(1, zeta)/(2 zeta + gamma)} max(1, gamma ln n).
    CHECK(sketch_dimension_schedule(1024, 0.5, 0.5, ScheduleRegime::nystrom) ==
          static_cast<Index>(std::ceil(std::pow(1024.0, 1.0 / 1.5) * std::max(1.0, 0.5 * std::log(1024.0)))));
    CHECK_THROWS_AS(sketch_dimension_schedule(1024, 0.0, 1.0, ScheduleRegime::nystrom), std::invalid_argument);
    CHECK_THROWS_AS(sketch_dimension_schedule(1024, 0.5, 0.0, ScheduleRegime::sketched), std::invalid_argument);
    CHECK_THROWS_AS(sketch_dimension_schedule(0, 0.5, 0.5, ScheduleRegime::experiment_sketched), std::invalid_argument);

    // Clipped to [1, n].
    CHECK(sketch_dimension_schedule(1, 0.5, 0.5, ScheduleRegime::experiment_nystrom) == 1);
    CHECK(sketch_dimension_schedule(8, 2.0, 1.0, ScheduleRegime::nystrom) <= 8);

    for (auto r : {ScheduleRegime::sketched, ScheduleRegime::nystrom, ScheduleRegime::experiment_sketched,
                   ScheduleRegime::experiment_nystrom})
        CHECK(parse_schedule_regime(to_string(r)) == r);
    CHECK_THROWS_AS(parse_schedule_regime("fast"), std::invalid_argument);
}

TEST_CASE("spectral report bundles the diagnostics") {
    const auto x = unit_grid(32);
    GramMatrix<double> k{oracle::sobolev_gram(x, x), true};
    const auto p = reduce_sketched(k, make_ros(4, 32, 2), Vector<double>::Ones(32));
    const auto r = spectral_report(k, 1e-3, p, 4);
    CHECK(r.lambda == 1e-3);
    CHECK(r.effective_dimension == doctest::Approx(effective_dimension(k, 1e-3)));
    CHECK(r.projection_error == doctest::Approx(projection_error(k, p)));
    CHECK(r.m_used == 4);
}
