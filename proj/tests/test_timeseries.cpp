#include "test_support.hpp"

#include "trpca/timeseries.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

using namespace trpca;
using trpca::testing::random_vector;

namespace {

SignalSeries ar1_series(std::uint64_t seed, std::size_t n, double phi) {
    Rng rng(seed);
    std::vector<double> v(n);
    double x = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        x = phi * x + rng.normal();
        v[t] = x;
    }
    return SignalSeries::from_values(v);
}

/// Last coefficient of the least-squares fit of x_t on (x_{t-1}, ..., x_{t-k}).
double regression_pacf(const std::vector<double>& x, std::size_t k) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    const Index rows = static_cast<Index>(x.size() - k);
    Matrix design(rows, static_cast<Index>(k));
    Vector target(rows);
    for (Index t = 0; t < rows; ++t) {
        const std::size_t now = static_cast<std::size_t>(t) + k;
        target(t) = x[now] - mean;
        for (std::size_t j = 1; j <= k; ++j) {
            design(t, static_cast<Index>(j - 1)) = x[now - j] - mean;
        }
    }
    const Vector coef = design.colPivHouseholderQr().solve(target);
    return coef(static_cast<Index>(k - 1));
}

/// A random profile of length `period` repeated `cycles` times, plus noise.
SignalSeries periodic_series(std::uint64_t seed, std::size_t period, std::size_t cycles,
                             double noise) {
    Rng rng(seed);
    const Vector profile = random_vector(rng, static_cast<Index>(period));
    std::vector<double> v;
    for (std::size_t c = 0; c < cycles; ++c) {
        for (std::size_t i = 0; i < period; ++i) {
            v.push_back(profile(static_cast<Index>(i)) + noise * rng.normal());
        }
    }
    return SignalSeries::from_values(v);
}

}  // namespace

TEST_CASE("from_values treats non-finite samples as missing") {
    const std::vector<double> v{1.0, std::numeric_limits<double>::quiet_NaN(), 3.0,
                                std::numeric_limits<double>::infinity()};
    const SignalSeries s = SignalSeries::from_values(v);
    REQUIRE(s.size() == 4);
    CHECK(s.observed_count() == 2);
    CHECK(!s.values[1].has_value());
    CHECK(!s.values[3].has_value());
    CHECK(*s.values[2] == 3.0);
}

TEST_CASE("reshape folds one period per column and masks the ragged tail") {
    std::vector<double> v;
    for (int i = 1; i <= 10; ++i) v.push_back(i);
    const ObservationMatrix m = reshape_to_matrix(SignalSeries::from_values(v), 4);
    REQUIRE(m.rows() == 4);
    REQUIRE(m.cols() == 3);
    CHECK(m.data(0, 0) == 1.0);
    CHECK(m.data(3, 0) == 4.0);
    CHECK(m.data(0, 1) == 5.0);
    CHECK(m.data(1, 2) == 10.0);
    CHECK(m.mask(1, 2));
    CHECK(!m.mask(2, 2));
    CHECK(!m.mask(3, 2));
    CHECK(m.observed_count() == 10);
}

TEST_CASE("flatten inverts reshape including missing samples") {
    Rng rng(3);
    std::vector<double> v(57);
    for (auto& x : v) x = rng.uniform() < 0.1 ? std::numeric_limits<double>::quiet_NaN() : rng.normal();
    const SignalSeries s = SignalSeries::from_values(v);
    for (Index period : {1, 5, 19, 57, 60}) {
        const SignalSeries back = flatten_to_signal(reshape_to_matrix(s, period), s.size());
        REQUIRE(back.size() == s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK(back.values[i] == s.values[i]);
        }
    }
}

TEST_CASE("reshape rejects a non-positive period") {
    const std::vector<double> v{1.0, 2.0};
    CHECK_THROWS_AS((void)reshape_to_matrix(SignalSeries::from_values(v), 0), std::invalid_argument);
}

TEST_CASE("pacf of an AR(1) process cuts off after lag 1") {
    const double phi = 0.6;
    const SignalSeries s = ar1_series(11, 20000, phi);
    const auto p = pacf(s, 6);
    REQUIRE(p.size() == 6);
    const double band = 3.0 / std::sqrt(20000.0);
    CHECK(std::abs(p[0] - phi) < band);
    for (std::size_t k = 1; k < p.size(); ++k) {
        CHECK(std::abs(p[k]) < band);
    }
}

TEST_CASE("pacf agrees with the least-squares autoregression coefficients") {
    Rng rng(5);
    std::vector<double> x(4000);
    double a = 0.0;
    double b = 0.0;
    for (auto& v : x) {
        const double next = 0.5 * a - 0.3 * b + rng.normal();
        b = a;
        a = next;
        v = next;
    }
    const auto p = pacf(SignalSeries::from_values(x), 5);
    for (std::size_t k = 1; k <= 5; ++k) {
        CHECK(std::abs(p[k - 1] - regression_pacf(x, k)) < 0.01);
    }
    CHECK(p[1] == doctest::Approx(-0.3).epsilon(0.1));
}

TEST_CASE("pacf with scattered missing samples stays close to the complete-data values") {
    const SignalSeries full = ar1_series(21, 10000, 0.7);
    SignalSeries holey = full;
    Rng rng(8);
    for (auto& v : holey.values) {
        if (rng.uniform() < 0.1) v.reset();
    }
    const auto a = pacf(full, 4);
    const auto b = pacf(holey, 4);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(std::abs(a[k] - b[k]) < 0.05);
    }
}

TEST_CASE("pacf values are bounded by one in magnitude") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto p = pacf(periodic_series(seed, 7, 30, 0.01), 20);
        for (double v : p) {
            CHECK(std::abs(v) <= 1.0);
        }
    }
}

TEST_CASE("pacf rejects zero variance and too-short input") {
    const std::vector<double> flat(50, 2.0);
    CHECK_THROWS_AS((void)pacf(SignalSeries::from_values(flat), 3), std::invalid_argument);
    const std::vector<double> shortv{1.0, 2.0, 3.0};
    CHECK_THROWS_AS((void)pacf(SignalSeries::from_values(shortv), 3), std::invalid_argument);
}

TEST_CASE("suggest_period recovers a noisy period-24 pattern") {
    const PeriodSuggestion s = suggest_period(periodic_series(1, 24, 40, 0.2), 60);
    CHECK(s.period == 24);
    CHECK(s.significant);
}

TEST_CASE("suggest_period on white noise stays inside a wide noise band") {
    Rng rng(9);
    std::vector<double> v(5000);
    for (auto& x : v) x = rng.normal();
    const PeriodSuggestion s = suggest_period(SignalSeries::from_values(v), 10);
    CHECK(s.period >= 2);
    CHECK(s.period <= 10);
    CHECK(std::abs(s.pacf_value) < 4.0 / std::sqrt(5000.0));
}
