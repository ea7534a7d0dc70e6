#ifndef DRIP_COMMON_HPP
#define DRIP_COMMON_HPP

#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace drip {

// Thrown when a linear system stays unsolvable after jitter escalation.
struct IllConditionedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when the saddle alternation fails to settle within its iteration cap.
struct NonConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when a constraint set is empty at the working tolerance.
struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Shortest round-trip decimal representation; keeps emitted CSV/JSON byte-stable.
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace drip

#endif
