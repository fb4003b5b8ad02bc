#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tsfool {

using Matrix = Eigen::MatrixXd;  // time series: rows = steps, cols = features
using Vector = Eigen::VectorXd;

// Error taxonomy maps onto CLI exit codes: usage=2, data/format=3, numerical=4.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Deterministic RNG. mt19937_64 output is bit-specified by the standard; the
// std::*_distribution adapters are not, so doubles are derived by hand:
// (x >> 11) * 2^-53 gives a uniform draw in [0, 1) using the top 53 bits.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    // Standard normal via Box-Muller (deterministic, stateless between calls).
    double gaussian() {
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Uniform integer in [0, n) by rejection (unbiased, reproducible).
    std::uint64_t below(std::uint64_t n);

  private:
    std::mt19937_64 engine_;
};

// Shortest decimal string that round-trips to the same double (std::to_chars).
std::string format_double(double v);

// Strict double parse of the whole token; throws DataError on junk.
double parse_double(std::string_view token, std::string_view context = {});

// argmax with smallest-index tie-break (exact equality).
int argmax_tie_low(const Vector& v);

}  // namespace tsfool
