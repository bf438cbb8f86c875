#include <doctest.h>

#include <cmath>

#include "sca/losses.hpp"
#include "test_util.hpp"

using namespace sca;

TEST_CASE("accuracy loss hinge and l1 terms") {
    // censored, prediction beyond the censoring time: no penalty
    auto r = accuracy_loss({5.0}, {0}, {7.0});
    CHECK(r.value == 0.0);
    CHECK(r.grad[0] == 0.0);

    // censored, prediction before the censoring time
    r = accuracy_loss({5.0}, {0}, {3.0});
    CHECK(r.value == doctest::Approx(2.0));
    CHECK(r.grad[0] == doctest::Approx(-1.0));

    // observed event
    r = accuracy_loss({5.0}, {1}, {3.0});
    CHECK(r.value == doctest::Approx(2.0));
    CHECK(r.grad[0] == doctest::Approx(-1.0));

    // each subset averaged separately
    r = accuracy_loss({5.0, 10.0, 2.0}, {1, 1, 0}, {4.0, 12.0, 1.0});
    CHECK(r.value == doctest::Approx((1.0 + 2.0) / 2.0 + 1.0));
}

TEST_CASE("accuracy loss is nonnegative and zero only at perfection") {
    Rng rng(3);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> t, g;
        std::vector<std::uint8_t> l;
        const std::size_t n = 1 + rng.integer(8);
        for (std::size_t i = 0; i < n; ++i) {
            t.push_back(rng.uniform(0.1, 10.0));
            g.push_back(rng.uniform(0.1, 10.0));
            l.push_back(rng.uniform() < 0.5 ? 1 : 0);
        }
        CHECK(accuracy_loss(t, l, g).value >= 0.0);
    }
    // perfect: events matched, censored exceeded
    const auto r = accuracy_loss({1.0, 2.0}, {1, 0}, {1.0, 3.0});
    CHECK(r.value == 0.0);
}

TEST_CASE("pkm_curve product-limit examples") {
    const TimeGrid grid = TimeGrid::from_times({1, 2, 3});
    auto s = pkm_curve({1, 2, 3}, {1, 1, 1}, grid);
    CHECK(s[0] == doctest::Approx(2.0 / 3.0));
    CHECK(s[1] == doctest::Approx(1.0 / 3.0));
    CHECK(s[2] == doctest::Approx(0.0));

    const TimeGrid partial{{1, 3}};
    s = pkm_curve({1, 2, 3}, {1, 0, 1}, partial);
    CHECK(s[0] == doctest::Approx(2.0 / 3.0));
    CHECK(s[1] == doctest::Approx(0.0));

    s = pkm_curve({1, 2, 3}, {0, 0, 0}, grid);
    for (double v : s) CHECK(v == 1.0);

    CHECK_THROWS_AS(pkm_curve({}, {}, grid), std::domain_error);
}

TEST_CASE("pkm_curve is non-increasing in [0,1] and exact without censoring") {
    Rng rng(17);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 1 + rng.integer(20);
        std::vector<double> t;
        std::vector<std::uint8_t> l(n, 1);
        for (std::size_t i = 0; i < n; ++i)
            t.push_back(1.0 + rng.integer(10));  // force ties
        const TimeGrid grid = TimeGrid::from_times(t);
        const auto s = pkm_curve(t, l, grid);
        double prev = 1.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK(s[i] <= prev + 1e-12);
            CHECK(s[i] >= -1e-12);
            CHECK(s[i] <= 1.0 + 1e-12);
            prev = s[i];
            // empirical survival fraction
            double frac = 0.0;
            for (double tn : t) frac += tn > grid.points[i] ? 1.0 : 0.0;
            CHECK(s[i] == doctest::Approx(frac / n).epsilon(1e-12));
        }
    }
}

TEST_CASE("calibration loss vanishes when samples equal fully-observed times") {
    Batch b;
    b.x = Tensor2(4, 1);
    b.t = {1, 2, 3, 4};
    b.l = {1, 1, 1, 1};
    const TimeGrid grid = TimeGrid::from_times(b.t);
    const auto r = calibration_loss(b, b.t, grid, 0.0);
    CHECK(r.value == 0.0);
}

TEST_CASE("calibration loss with all predictions past the horizon") {
    Batch b;
    b.x = Tensor2(4, 1);
    b.t = {1, 2, 3, 4};
    b.l = {1, 1, 1, 1};
    const TimeGrid grid = TimeGrid::from_times(b.t);
    const auto r = calibration_loss(b, {100, 200, 300, 400}, grid, 0.0);
    // model survival stays 1, so the loss is the mean data CDF over the grid
    const auto data_curve = pkm_curve(b.t, b.l, grid);
    double expect = 0.0;
    for (double s : data_curve) expect += 1.0 - s;
    expect /= static_cast<double>(data_curve.size());
    CHECK(r.value == doctest::Approx(expect));
    CHECK(r.value > 0.0);
}

TEST_CASE("calibration loss stays within [0,1]") {
    Rng rng(23);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 2 + rng.integer(12);
        Batch b;
        b.x = Tensor2(n, 1);
        std::vector<double> gen;
        for (std::size_t i = 0; i < n; ++i) {
            b.t.push_back(rng.uniform(0.1, 20.0));
            b.l.push_back(rng.uniform() < 0.7 ? 1 : 0);
            gen.push_back(rng.uniform(0.1, 20.0));
        }
        const TimeGrid grid = TimeGrid::from_times(b.t);
        for (double tau : {0.0, 0.5}) {
            const auto r = calibration_loss(b, gen, grid, tau);
            CHECK(r.value >= 0.0);
            CHECK(r.value <= 1.0);
        }
    }
}

TEST_CASE("smoothed calibration gradient matches finite differences") {
    Rng rng(31);
    Batch b;
    const std::size_t n = 8;
    b.x = Tensor2(n, 1);
    std::vector<double> gen;
    for (std::size_t i = 0; i < n; ++i) {
        b.t.push_back(rng.uniform(0.5, 10.0));
        b.l.push_back(rng.uniform() < 0.7 ? 1 : 0);
        gen.push_back(rng.uniform(0.5, 10.0));
    }
    const TimeGrid grid = TimeGrid::from_times(b.t);
    const double tau = default_temperature(grid);
    const auto r = calibration_loss(b, gen, grid, tau);
    for (std::size_t i = 0; i < n; ++i) {
        const double fd = testutil::central_diff(
            [&](double val) {
                std::vector<double> g = gen;
                g[i] = val;
                return calibration_loss(b, g, grid, tau).value;
            },
            gen[i], 1e-6);
        if (std::abs(fd) < 1e-12 && std::abs(r.grad[i]) < 1e-12) continue;
        CHECK(testutil::rel_err(r.grad[i], fd) < 1e-3);
    }
}

TEST_CASE("total loss arithmetic") {
    CHECK(total_loss(0.5, 1.0, 0.2) == doctest::Approx(1.7));
    CHECK(total_loss(0.0, 0.0, 0.0) == 0.0);
    CHECK(total_loss(1.0, 1.0, 1.0, 2.0, 0.5) == doctest::Approx(3.5));
    CHECK_THROWS_AS(total_loss(1, 1, 1, 0.0, 1.0), std::invalid_argument);
}
