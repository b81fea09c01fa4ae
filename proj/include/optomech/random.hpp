#pragma once

// Counter-based Philox4x32-10 engine with one independent stream per
// (seed, trajectory) pair, plus Marsaglia polar normals.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace optomech {

class Philox4x32 {
public:
    using result_type = std::uint32_t;
    using counter_type = std::array<std::uint32_t, 4>;
    using key_type = std::array<std::uint32_t, 2>;

    explicit Philox4x32(std::uint64_t key = 0) noexcept
        : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

    /// Stream for trajectory `index` under `seed`: key = seed ^ index.
    static Philox4x32 stream(std::uint64_t seed, std::uint64_t index) noexcept { return Philox4x32(seed ^ index); }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        if (pos_ == 4) {
            block_ = bijection(counter_, key_);
            increment();
            pos_ = 0;
        }
        return block_[pos_++];
    }

    /// The raw 10-round bijection, exposed for known-answer tests.
    static counter_type bijection(counter_type c, key_type k) noexcept {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(0xD2511F53u) * c[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(0xCD9E8D57u) * c[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
            c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
            k[0] += 0x9E3779B9u;
            k[1] += 0xBB67AE85u;
        }
        return c;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept {
        const std::uint64_t a = (*this)() >> 5;
        const std::uint64_t b = (*this)() >> 6;
        return static_cast<double>(a * 67108864u + b) * (1.0 / 9007199254740992.0);
    }

    /// Standard normal deviate, Marsaglia polar method (pairs cached).
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

private:
    void increment() noexcept {
        for (auto& word : counter_) {
            if (++word != 0) break;
        }
    }

    key_type key_;
    counter_type counter_{0, 0, 0, 0};
    counter_type block_{};
    int pos_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace optomech
