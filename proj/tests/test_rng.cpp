#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "covtune/rng.hpp"

using covtune::Rng;

TEST_CASE("identical seeds give identical streams", "[rng]") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(a.uniform01() == b.uniform01());
        REQUIRE(a.normal() == b.normal());
    }
}

TEST_CASE("different seeds give different streams", "[rng]") {
    Rng a(1), b(2);
    int same = 0;
    for (int i = 0; i < 100; ++i)
        if (a.uniform01() == b.uniform01()) ++same;
    REQUIRE(same == 0);
}

TEST_CASE("uniform01 stays in the half-open unit interval", "[rng]") {
    Rng r(7);
    for (int i = 0; i < 100000; ++i) {
        double u = r.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("normal draws have unit-ish moments", "[rng]") {
    Rng r(2026);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        double z = r.normal();
        sum += z;
        sumsq += z * z;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    // std error of the mean is ~1/sqrt(n) ~ 0.0022
    REQUIRE(std::abs(mean) < 0.01);
    REQUIRE(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("uniform_below covers the whole range and nothing else", "[rng]") {
    Rng r(11);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 5000; ++i) {
        std::uint64_t v = r.uniform_below(7);
        REQUIRE(v < 7);
        seen.insert(v);
    }
    REQUIRE(seen.size() == 7);
}

TEST_CASE("uniform_below rejects an empty range", "[rng]") {
    Rng r(11);
    REQUIRE_THROWS_AS(r.uniform_below(0), covtune::config_error);
}

TEST_CASE("bernoulli matches its probability", "[rng]") {
    Rng r(3);
    const int n = 100000;
    int hits = 0;
    for (int i = 0; i < n; ++i)
        if (r.bernoulli(0.01)) ++hits;
    // 3 sigma band around np with sigma = sqrt(n p (1-p)) ~ 31.5
    REQUIRE(hits > 1000 - 100);
    REQUIRE(hits < 1000 + 100);
}

TEST_CASE("per-trial streams are reproducible and distinct", "[rng]") {
    Rng a = Rng::for_trial(2026, 5);
    Rng b = Rng::for_trial(2026, 5);
    Rng c = Rng::for_trial(2026, 6);
    double va = a.normal(), vb = b.normal(), vc = c.normal();
    REQUIRE(va == vb);
    REQUIRE(va != vc);
}

TEST_CASE("trial streams look mutually independent", "[rng]") {
    // correlate consecutive-trial streams; should be noise level
    const int n = 20000;
    std::vector<double> x(n), y(n);
    Rng a = Rng::for_trial(99, 0);
    Rng b = Rng::for_trial(99, 1);
    for (int i = 0; i < n; ++i) {
        x[i] = a.normal();
        y[i] = b.normal();
    }
    double sxy = 0.0;
    for (int i = 0; i < n; ++i) sxy += x[i] * y[i];
    REQUIRE(std::abs(sxy / n) < 0.03);
}
