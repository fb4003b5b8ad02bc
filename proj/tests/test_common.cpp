#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>

#include "tsfool/common.hpp"

using namespace tsfool;

TEST_CASE("format_double round-trips bitwise") {
    const double cases[] = {0.0,     -0.0,   1.0,        0.1,     1.0 / 3.0,
                            1e-300,  1e300,  -12345.6789, 2.5e-15, std::numbers::pi,
                            0x1p-1074 /* smallest denormal */};
    for (double v : cases) {
        double back = parse_double(format_double(v));
        CHECK(std::memcmp(&back, &v, sizeof v) == 0);
    }
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        double v = (rng.uniform01() - 0.5) * std::pow(10.0, rng.uniform(-30.0, 30.0));
        double back = parse_double(format_double(v));
        CHECK(std::memcmp(&back, &v, sizeof v) == 0);
    }
}

TEST_CASE("parse_double accepts padded tokens, rejects junk") {
    CHECK(parse_double("+1.5") == 1.5);
    CHECK(parse_double(" 2.5 ") == 2.5);
    CHECK(parse_double("\t-3e2\r") == -300.0);
    CHECK(parse_double("1e3") == 1000.0);
    CHECK_THROWS_AS(parse_double("abc"), DataError);
    CHECK_THROWS_AS(parse_double("1.5x"), DataError);
    CHECK_THROWS_AS(parse_double(""), DataError);
    CHECK_THROWS_AS(parse_double("--2"), DataError);
    CHECK_THROWS_AS(parse_double("1.5 2.5"), DataError);
}

TEST_CASE("rng is deterministic per seed") {
    Rng a(42), b(42), c(43);
    bool anyDiff = false;
    for (int i = 0; i < 16; ++i) {
        CHECK(a.next() == b.next());
        double ua = a.uniform01(), ub = b.uniform01(), uc = c.uniform01();
        CHECK(ua == ub);
        if (ua != uc) anyDiff = true;
    }
    CHECK(anyDiff);
}

TEST_CASE("uniform01 stays in [0,1) and fills the range") {
    Rng rng(1);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 10000; ++i) {
        double u = rng.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
}

TEST_CASE("bernoulli edge probabilities") {
    Rng rng(2);
    for (int i = 0; i < 100; ++i) {
        CHECK_FALSE(rng.bernoulli(0.0));
        CHECK(rng.bernoulli(1.0));
    }
    int kept = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) kept += rng.bernoulli(0.7);
    CHECK(std::abs(kept / double(n) - 0.7) < 0.02);
}

TEST_CASE("below is bounded and covers all residues") {
    Rng rng(3);
    bool seen[7] = {};
    for (int i = 0; i < 1000; ++i) {
        auto v = rng.below(7);
        CHECK(v < 7);
        seen[v] = true;
    }
    for (bool s : seen) CHECK(s);
}

TEST_CASE("gaussian has roughly standard moments") {
    Rng rng(4);
    const int n = 20000;
    double sum = 0, sumSq = 0;
    for (int i = 0; i < n; ++i) {
        double g = rng.gaussian();
        sum += g;
        sumSq += g * g;
    }
    double mean = sum / n;
    double var = sumSq / n - mean * mean;
    CHECK(std::abs(mean) < 0.03);
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("argmax_tie_low prefers the smaller index") {
    Vector v(3);
    v << 0.0, 3.0, 3.0;
    CHECK(argmax_tie_low(v) == 1);
    v << 5.0, 5.0, 5.0;
    CHECK(argmax_tie_low(v) == 0);
    Vector one(1);
    one << -2.0;
    CHECK(argmax_tie_low(one) == 0);
}
