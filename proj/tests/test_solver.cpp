#include <doctest.h>

#include <random>

#include "kcgm/solver.hpp"
#include "oracles.hpp"

using namespace kcgm;

namespace {

Dataset<double> synthetic(Index n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    Dataset<double> d;
    d.x.resize(n, 1);
    d.y.resize(n);
    for (Index i = 0; i < n; ++i) {
        d.x(i, 0) = unif(gen);
        d.y(i) = std::abs(d.x(i, 0) - 0.5) - 0.5 + noise(gen);
    }
    return d;
}

Matrix<double> grid101() {
    Matrix<double> g(101, 1);
    for (Index i = 0; i < 101; ++i) g(i, 0) = static_cast<double>(i) / 100.0;
    return g;
}

SolverConfig fixed(Variant v, SketchKind kind, Index m, Index t) {
    SolverConfig c;
    c.variant = v;
    c.sketch.kind = kind;
    c.sketch.m = m;
    c.sketch.seed = 3;
    c.t_max = t;
    c.stopping = FixedIterations{t};
    return c;
}

}  // namespace

TEST_CASE("stopping threshold formula") {
    const double delta = 2.0 / std::exp(1.0);  // log(2/delta) = 1
    CHECK(stopping_threshold(1024, 0.5, 0.5, 1.0, delta) ==
          doctest::Approx(std::pow(2.0, -20.0 / 3.0)).epsilon(1e-12));
    CHECK(stopping_threshold(1024, 0.5, 0.5, 1.0, delta) == doctest::Approx(9.8431332e-3).epsilon(1e-7));

    // Capacity-independent boundary: exponent 1/2 and b = max(1, ln n).
    const double n = 1000.0;
    CHECK(stopping_threshold(n, 0.0, 1.0, 1.0, 0.1) ==
          doctest::Approx(std::pow(std::log(20.0), 1.5) / std::sqrt(n) * std::sqrt(std::log(n))).epsilon(1e-13));
    CHECK(log_factor(n, 0.0, 1.0) == doctest::Approx(std::log(n)));
    CHECK(log_factor(n, 0.5, 0.5) == 1.0);
    CHECK(log_factor(2.0, 0.0, 1.0) == 1.0);

    for (double tau : {0.3, 1.0, 7.5})
        CHECK(stopping_threshold(500, 0.7, 0.4, 2 * tau, 0.05) == 2 * stopping_threshold(500, 0.7, 0.4, tau, 0.05));

    CHECK_THROWS_AS(stopping_threshold(100, -0.1, 0.5, 1, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(stopping_threshold(100, 0.5, 0.0, 1, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(stopping_threshold(100, 0.5, 1.5, 1, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(stopping_threshold(100, 0.5, 0.5, 0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(stopping_threshold(100, 0.5, 0.5, 1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(stopping_threshold(100, 0.5, 0.5, 1, 1.0), std::invalid_argument);
}

TEST_CASE("first crossing") {
    const std::vector<double> r{0.9, 0.5, 0.3, 0.3, 0.1};
    auto d = first_crossing(r, 0.3);
    CHECK(d.t_hat == 3);
    CHECK(d.reached);
    CHECK(d.residual_at_stop == 0.3);
    d = first_crossing(r, 0.05);
    CHECK_FALSE(d.reached);
    CHECK(d.t_hat == 5);
    d = first_crossing(r, 2.0);
    CHECK(d.t_hat == 1);
}

TEST_CASE("threshold stopping returns the first crossing of the tracked residuals") {
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        const auto data = synthetic(64, 100 + static_cast<std::uint64_t>(rep));
        SolverConfig c = fixed(rep % 2 ? Variant::sketched : Variant::nystrom,
                               rep % 2 ? SketchKind::gaussian : SketchKind::nystrom_plain, 16, 16);
        c.stopping = ResidualThreshold{0.5, 0.5, 0.01 + unif(gen), 0.1};
        const auto fit_result = fit(data, KernelSpec::sobolev(), c);
        const auto& res = fit_result.trace.residuals;
        const auto& d = fit_result.decision;
        const double thr = d.threshold_value;
        Index scan = 0;
        for (std::size_t i = 0; i < res.size(); ++i)
            if (res[i] <= thr) {
                scan = static_cast<Index>(i + 1);
                break;
            }
        if (scan == 0) {
            CHECK_FALSE(d.reached);
            CHECK(d.t_hat == static_cast<Index>(res.size()));
        } else {
            CHECK(d.reached);
            CHECK(d.t_hat == scan);
            CHECK(res[static_cast<std::size_t>(d.t_hat - 1)] <= thr);
            if (d.t_hat > 1) CHECK(res[static_cast<std::size_t>(d.t_hat - 2)] > thr);
        }
        CHECK(fit_result.predictor.chosen_t == d.t_hat);
    }
}

TEST_CASE("one training point is interpolated after one step") {
    Dataset<double> d;
    d.x = Matrix<double>::Constant(1, 1, 0.3);
    d.y = Vector<double>::Constant(1, -0.7);
    for (auto [variant, kind] : {std::pair{Variant::classic, SketchKind::identity},
                                 std::pair{Variant::sketched, SketchKind::gaussian},
                                 std::pair{Variant::sketched, SketchKind::ros},
                                 std::pair{Variant::nystrom, SketchKind::nystrom_plain}}) {
        const auto r = fit(d, KernelSpec::sobolev(), fixed(variant, kind, 1, 1));
        CHECK(r.trace.residuals[0] <= 1e-14);
        CHECK(r.predictor(0.3) == doctest::Approx(-0.7).epsilon(1e-12));
    }
}

TEST_CASE("identity sketch, full Nystrom and classic give the same predictor") {
    const auto grid = grid101();
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        for (Index n : {16, 64, 128}) {
            const auto data = synthetic(n, seed * 17 + static_cast<std::uint64_t>(n));
            const Index t_max = 10;
            const auto classic = fit(data, KernelSpec::sobolev(), fixed(Variant::classic, SketchKind::identity, n, t_max));
            const auto sketched =
                fit(data, KernelSpec::sobolev(), fixed(Variant::sketched, SketchKind::identity, n, t_max));
            const auto nystrom =
                fit(data, KernelSpec::sobolev(), fixed(Variant::nystrom, SketchKind::identity, n, t_max));
            for (Index t = 1; t <= t_max; ++t) {
                const Vector<double> pc = classic.predictor_at(t).predict(grid);
                CHECK((sketched.predictor_at(t).predict(grid) - pc).cwiseAbs().maxCoeff() <= 1e-8);
                CHECK((nystrom.predictor_at(t).predict(grid) - pc).cwiseAbs().maxCoeff() <= 1e-8);
            }
        }
    }
}

TEST_CASE("Nystrom reduction with a full plain sample also matches classic") {
    const auto data = synthetic(64, 5);
    const auto grid = grid101();
    const auto classic = fit(data, KernelSpec::sobolev(), fixed(Variant::classic, SketchKind::identity, 64, 8));
    const auto nystrom = fit(data, KernelSpec::sobolev(), fixed(Variant::nystrom, SketchKind::nystrom_plain, 64, 8));
    for (Index t = 1; t <= 8; ++t)
        CHECK((nystrom.predictor_at(t).predict(grid) - classic.predictor_at(t).predict(grid)).cwiseAbs().maxCoeff() <=
              1e-8);
}

TEST_CASE("ALS subsampling gives the same predictor through either reduction") {
    const auto data = synthetic(64, 8);
    const auto grid = grid101();
    SolverConfig a = fixed(Variant::nystrom, SketchKind::nystrom_als, 20, 6);
    SolverConfig b = fixed(Variant::sketched, SketchKind::nystrom_als, 20, 6);
    a.sketch.lambda = b.sketch.lambda = 1e-3;
    const auto ra = fit(data, KernelSpec::sobolev(), a);
    const auto rb = fit(data, KernelSpec::sobolev(), b);
    for (Index t = 1; t <= 6; ++t)
        CHECK((ra.predictor_at(t).predict(grid) - rb.predictor_at(t).predict(grid)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("oracle stopping picks the smallest supplied error") {
    const auto data = synthetic(128, 12);
    const auto grid = grid101();
    const ErrorFunction<double> error = [&](const Predictor<double>& p) {
        const Vector<double> f = p.predict(grid);
        double s = 0.0;
        for (Index i = 0; i < grid.rows(); ++i) s += std::pow(f(i) - (std::abs(grid(i, 0) - 0.5) - 0.5), 2);
        return s / 101.0;
    };
    SolverConfig c;
    c.variant = Variant::sketched;
    c.sketch.kind = SketchKind::ros;
    c.sketch.m = 12;
    const auto r = fit(data, KernelSpec::sobolev(), c, error);
    CHECK(r.trace.size() == 12);  // t_max defaults to m
    REQUIRE(r.oracle_errors.size() == 12);
    const auto best = std::min_element(r.oracle_errors.begin(), r.oracle_errors.end());
    CHECK(r.decision.t_hat == static_cast<Index>(best - r.oracle_errors.begin()) + 1);
    CHECK(error(r.predictor) == *best);
    CHECK_THROWS_AS(fit(data, KernelSpec::sobolev(), c), std::invalid_argument);
}

TEST_CASE("fit defaults and errors") {
    const auto data = synthetic(32, 2);
    SolverConfig classic = fixed(Variant::classic, SketchKind::identity, 32, 0);
    classic.stopping = FixedIterations{100};
    const auto r = fit(data, KernelSpec::sobolev(), classic);
    CHECK(r.trace.size() == 32);
    CHECK(r.decision.t_hat == 32);

    SolverConfig bad = fixed(Variant::nystrom, SketchKind::gaussian, 4, 4);
    CHECK_THROWS_AS(fit(data, KernelSpec::sobolev(), bad), std::invalid_argument);

    Dataset<double> zero = data;
    zero.y.setZero();
    const auto z = fit(zero, KernelSpec::sobolev(), fixed(Variant::sketched, SketchKind::gaussian, 4, 4));
    CHECK(z.trace.trivial);
    CHECK(z.decision.t_hat == 0);
    CHECK(z.predictor.predict(grid101()).cwiseAbs().maxCoeff() == 0.0);

    Dataset<double> outside = data;
    outside.x(0, 0) = 1.5;
    CHECK_THROWS_AS(fit(outside, KernelSpec::sobolev(), classic), std::invalid_argument);
}

TEST_CASE("kernel ridge regression") {
    Dataset<double> one;
    one.x = Matrix<double>::Zero(1, 1);
    one.y = Vector<double>::Constant(1, 2.0);
    const auto r = fit_krr(one, KernelSpec::sobolev(), {1.0});
    CHECK(r.predictor.coefficients(0) == doctest::Approx(1.0).epsilon(1e-15));

    const auto data = synthetic(40, 4);
    const auto huge = fit_krr(data, KernelSpec::sobolev(), {1e12});
    CHECK(huge.predictor.coefficients.cwiseAbs().maxCoeff() < 1e-9);

    const auto tiny = fit_krr(data, KernelSpec::sobolev(), {1e-13});
    const Vector<double> fitted = tiny.predictor.predict(data.x);
    CHECK((fitted - data.y).cwiseAbs().maxCoeff() < 1e-6);

    // Coefficients solve (K + n lambda I) alpha = y.
    const Matrix<double> k = oracle::sobolev_gram(oracle::to_vector(data.x), oracle::to_vector(data.x)) * 40.0;
    const auto mid = fit_krr(data, KernelSpec::sobolev(), {1e-3});
    const Vector<double> alpha = (k + 40.0 * 1e-3 * Matrix<double>::Identity(40, 40)).fullPivLu().solve(data.y);
    CHECK((mid.predictor.coefficients - alpha).cwiseAbs().maxCoeff() < 1e-9);

    // Oracle lambda selection.
    const std::vector<double> grid{1e-5, 1e-3, 1e-1, 10.0};
    const ErrorFunction<double> err = [](const Predictor<double>& p) {
        const Matrix<double> g = grid101();
        const Vector<double> f = p.predict(g);
        double s = 0.0;
        for (Index i = 0; i < g.rows(); ++i) s += std::pow(f(i) - (std::abs(g(i, 0) - 0.5) - 0.5), 2);
        return s;
    };
    const auto sel = fit_krr(data, KernelSpec::sobolev(), grid, err);
    REQUIRE(sel.errors.size() == 4);
    const auto best = std::min_element(sel.errors.begin(), sel.errors.end()) - sel.errors.begin();
    CHECK(sel.lambda == grid[static_cast<std::size_t>(best)]);
    for (std::size_t i = 0; i < grid.size(); ++i)
        CHECK(sel.errors[i] == doctest::Approx(err(fit_krr(data, KernelSpec::sobolev(), {grid[i]}).predictor)));

    CHECK_THROWS_AS(fit_krr(data, KernelSpec::sobolev(), {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(fit_krr(data, KernelSpec::sobolev(), {}), std::invalid_argument);
    CHECK_THROWS_AS(fit_krr(data, KernelSpec::sobolev(), {0.1, 0.2}), std::invalid_argument);
}
