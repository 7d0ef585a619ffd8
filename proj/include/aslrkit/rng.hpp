#pragma once

#include <cstdint>

namespace aslrkit {

// Counter-based generator used by the policy simulator. Every output is a
// pure function of (seed, stream, counter), so records can be produced in
// any order or in parallel and still match byte for byte. The mixer is the
// splitmix64 finalizer applied twice; the algorithm identifier written to
// synthetic headers is "splitmix64-ctr/1".
inline constexpr char kRngAlgorithm[] = "splitmix64-ctr/1";

namespace detail {
inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}
} // namespace detail

class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : state_(detail::splitmix64(seed ^ detail::splitmix64(stream))) {}

    std::uint64_t next(std::uint64_t counter) const {
        return detail::splitmix64(state_ + counter * detail::kGolden);
    }

    // Unbiased draw in [0, n) by rejection; consumes counters from
    // *counter, which advances past the values used.
    std::uint64_t bounded(std::uint64_t n, std::uint64_t* counter) const {
        if (n <= 1) return 0;
        const std::uint64_t limit = ~0ull - ~0ull % n;
        for (;;) {
            std::uint64_t r = next((*counter)++);
            if (r < limit) return r % n;
        }
    }

private:
    std::uint64_t state_;
};

// Stream id for a (policy object, draw slot) pair.
inline std::uint64_t draw_stream(std::uint32_t object_index, std::uint32_t draw_slot) {
    return (std::uint64_t(object_index) << 8) | draw_slot;
}

} // namespace aslrkit
