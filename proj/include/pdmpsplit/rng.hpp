// Seedable RNG streams (Philox4x32-10) and the distribution draws used by the
// samplers. Each (seed, stream) pair owns a disjoint 2^64 slice of the counter
// space, so replicate streams are overlap-free by construction.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace pdmps {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
// Counter layout: words 0-1 hold the running block index, words 2-3 the stream
// id. Key = the 64-bit user seed. Known-answer vectors are pinned in the tests.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    std::uint64_t next_u64() {
        if (idx_ >= 4) generate_block();
        std::uint64_t lo = out_[idx_], hi = out_[idx_ + 1];
        idx_ += 2;
        return lo | (hi << 32);
    }

    // Uniform on [0, 1): 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]: never returns 0, safe under log().
    double uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double r = std::sqrt(-2.0 * std::log(uniform_pos()));
        double t = 6.283185307179586476925286766559 * uniform01();
        cached_ = r * std::sin(t);
        have_cached_ = true;
        return r * std::cos(t);
    }

    // Integer uniform on {0, ..., n-1} by rejection on the top bits.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("RngStream::below: n must be positive");
        std::uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

private:
    static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
        std::uint64_t p = static_cast<std::uint64_t>(a) * b;
        hi = static_cast<std::uint32_t>(p >> 32);
        lo = static_cast<std::uint32_t>(p);
    }

    void generate_block() {
        std::uint32_t c[4] = {static_cast<std::uint32_t>(block_),
                              static_cast<std::uint32_t>(block_ >> 32),
                              static_cast<std::uint32_t>(stream_),
                              static_cast<std::uint32_t>(stream_ >> 32)};
        std::uint32_t k0 = static_cast<std::uint32_t>(seed_);
        std::uint32_t k1 = static_cast<std::uint32_t>(seed_ >> 32);
        for (int round = 0; round < 10; ++round) {
            std::uint32_t hi0, lo0, hi1, lo1;
            mulhilo(0xD2511F53u, c[0], hi0, lo0);
            mulhilo(0xCD9E8D57u, c[2], hi1, lo1);
            std::uint32_t n0 = hi1 ^ c[1] ^ k0;
            std::uint32_t n1 = lo1;
            std::uint32_t n2 = hi0 ^ c[3] ^ k1;
            std::uint32_t n3 = lo0;
            c[0] = n0; c[1] = n1; c[2] = n2; c[3] = n3;
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        out_[0] = c[0]; out_[1] = c[1]; out_[2] = c[2]; out_[3] = c[3];
        ++block_;
        idx_ = 0;
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::uint32_t out_[4] = {0, 0, 0, 0};
    int idx_ = 4;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

// Exponential clock with the PDMP convention: rate 0 means "no event", +inf.
inline double exp_draw(RngStream& rng, double rate) {
    if (rate < 0.0) throw std::invalid_argument("exp_draw: negative rate");
    if (rate == 0.0) return std::numeric_limits<double>::infinity();
    return -std::log(rng.uniform_pos()) / rate;
}

// Inverse-CDF arithmetic split out so it can be checked without an engine.
inline double exp_inverse_cdf(double u, double rate) { return -std::log(u) / rate; }

inline std::vector<double> std_normal_vec(RngStream& rng, int d) {
    if (d < 1) throw std::invalid_argument("std_normal_vec: d must be >= 1");
    std::vector<double> z(d);
    for (auto& zi : z) zi = rng.normal();
    return z;
}

// Uniform on the unit sphere S^{d-1}; for d = 1 this is {-1, +1}.
inline std::vector<double> unit_sphere(RngStream& rng, int d) {
    if (d < 1) throw std::invalid_argument("unit_sphere: d must be >= 1");
    if (d == 1) return {rng.uniform01() < 0.5 ? -1.0 : 1.0};
    for (;;) {
        std::vector<double> z = std_normal_vec(rng, d);
        double n2 = 0.0;
        for (double zi : z) n2 += zi * zi;
        double n = std::sqrt(n2);
        if (n < 1e-300) continue;  // underflow guard, essentially never taken
        for (auto& zi : z) zi /= n;
        return z;
    }
}

inline std::vector<double> rademacher(RngStream& rng, int d) {
    if (d < 1) throw std::invalid_argument("rademacher: d must be >= 1");
    std::vector<double> v(d);
    for (auto& vi : v) vi = rng.uniform01() < 0.5 ? -1.0 : 1.0;
    return v;
}

}  // namespace pdmps
