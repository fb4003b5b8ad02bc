#include "tsfool/common.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

namespace tsfool {

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw UsageError("Rng::below(0)");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return x % n;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw NumericError("format_double failed");
    return std::string(buf, ptr);
}

double parse_double(std::string_view token, std::string_view context) {
    // Trim surrounding spaces/CR; from_chars wants a bare number.
    while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
    while (!token.empty() &&
           (token.back() == ' ' || token.back() == '\t' || token.back() == '\r'))
        token.remove_suffix(1);
    double out = 0.0;
    // from_chars does not accept a leading '+'.
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
        std::string where = context.empty() ? std::string() : " (" + std::string(context) + ")";
        throw DataError("cannot parse number '" + std::string(token) + "'" + where);
    }
    return out;
}

int argmax_tie_low(const Vector& v) {
    if (v.size() == 0) throw NumericError("argmax of empty vector");
    int best = 0;
    for (int i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

}  // namespace tsfool
