#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

namespace dlfuzz {

/// splitmix64: 64-bit state, passes BigCrush, trivially splittable.
/// All randomness in the project flows through this type so campaigns
/// replay bit-exactly from a single master seed.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += UINT64_C(0x9E3779B97F4A7C15));
        z = (z ^ (z >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)) * UINT64_C(0x94D049BB133111EB);
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Uniform index in [0, n). Requires n > 0.
    std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

    /// Counter-based split: independent child stream per label without
    /// advancing this stream, so per-candidate substreams do not depend
    /// on evaluation order.
    SplitMix64 split_at(std::uint64_t label) const {
        SplitMix64 child(state_ ^ (UINT64_C(0xD1B54A32D192ED03) * (label + 1)));
        child.next_u64();
        return child;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

}  // namespace dlfuzz
