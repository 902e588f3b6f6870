#pragma once

// Counter-based random streams (Philox4x32-10). A stream is addressed by
// (seed, path...) where the path encodes sample size, replicate index and
// purpose; distinct addresses give statistically independent streams and
// the same address always replays the same sequence, independent of how
// many draws other streams made. That is what makes replicate-order and
// worker-count changes leave results bit-identical.

#include <cstdint>
#include <cmath>
#include <initializer_list>
#include <stdexcept>

namespace coalsim {

// Purposes are part of the stream address, never reused across kinds of
// randomness inside one replicate.
enum class StreamPurpose : std::uint64_t {
    tree = 1,
    mutation = 2,
    aux = 3,
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

} // namespace detail

class RngStream {
  public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
        key_[0] = static_cast<std::uint32_t>(seed);
        key_[1] = static_cast<std::uint32_t>(seed >> 32);
        std::uint64_t id = detail::splitmix64(seed);
        for (std::uint64_t p : path) id = detail::splitmix64(id ^ p);
        stream_lo_ = static_cast<std::uint32_t>(id);
        stream_hi_ = static_cast<std::uint32_t>(id >> 32);
    }

    RngStream(std::uint64_t seed, std::uint64_t n, std::uint64_t replicate,
              StreamPurpose purpose)
        : RngStream(seed, {n, replicate, static_cast<std::uint64_t>(purpose)}) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~0ull; }

    result_type operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        std::uint32_t c[4] = {static_cast<std::uint32_t>(block_),
                              static_cast<std::uint32_t>(block_ >> 32),
                              stream_lo_, stream_hi_};
        ++block_;
        std::uint32_t k0 = key_[0], k1 = key_[1];
        for (int r = 0; r < 10; ++r) {
            if (r > 0) {
                k0 += 0x9E3779B9u;
                k1 += 0xBB67AE85u;
            }
            const std::uint64_t p0 = 0xD2511F53ull * c[0];
            const std::uint64_t p1 = 0xCD9E8D57ull * c[2];
            const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            const std::uint32_t n0 = hi1 ^ c[1] ^ k0;
            const std::uint32_t n1 = lo1;
            const std::uint32_t n2 = hi0 ^ c[3] ^ k1;
            const std::uint32_t n3 = lo0;
            c[0] = n0; c[1] = n1; c[2] = n2; c[3] = n3;
        }
        spare_ = (static_cast<std::uint64_t>(c[2]) << 32) | c[3];
        have_spare_ = true;
        return (static_cast<std::uint64_t>(c[0]) << 32) | c[1];
    }

    // Uniform on [0,1), 53-bit resolution.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    // Uniform on the open interval (0,1); safe under log().
    double uniform_open() {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    double exponential(double rate) {
        if (!(rate > 0.0)) throw std::domain_error("exponential: rate must be > 0");
        return -std::log(uniform_open()) / rate;
    }

    // Unbiased integer on [0, bound) by masked rejection.
    std::uint64_t below(std::uint64_t bound) {
        if (bound == 0) throw std::domain_error("below: bound must be positive");
        if (bound == 1) return 0;
        std::uint64_t mask = ~0ull >> __builtin_clzll(bound - 1);
        for (;;) {
            const std::uint64_t v = (*this)() & mask;
            if (v < bound) return v;
        }
    }

    // Exact Poisson sample. Knuth inversion for small means; larger means
    // are split additively, which stays exact in law.
    long poisson(double mean) {
        if (mean < 0.0 || !std::isfinite(mean))
            throw std::domain_error("poisson: mean must be finite and >= 0");
        long total = 0;
        while (mean > 12.0) {
            const double half = mean * 0.5;
            total += poisson_small(half);
            mean -= half;
        }
        return total + poisson_small(mean);
    }

  private:
    long poisson_small(double mean) {
        if (mean == 0.0) return 0;
        const double limit = std::exp(-mean);
        long k = 0;
        double prod = uniform_open();
        while (prod > limit) {
            ++k;
            prod *= uniform_open();
        }
        return k;
    }

    std::uint32_t key_[2];
    std::uint32_t stream_lo_, stream_hi_;
    std::uint64_t block_ = 0;
    std::uint64_t spare_ = 0;
    bool have_spare_ = false;
};

} // namespace coalsim
