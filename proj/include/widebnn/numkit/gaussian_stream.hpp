#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace widebnn {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finaliser; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

}  // namespace detail

/// Reproducible stream of standard normal variates keyed by (seed, stream_id).
///
/// The key is hashed into the state of a xoshiro256** generator; normals come
/// from the Marsaglia polar form of Box–Muller. The stream is a value: copies
/// continue independently from the same position.
class GaussianStream {
  public:
    GaussianStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
        : seed_(seed), stream_id_(stream_id) {
        // Distinct ids map to distinct keys: both steps are bijections.
        std::uint64_t key = detail::mix64(seed ^ detail::mix64(stream_id ^ 0x6a09e667f3bcc909ULL));
        for (auto& word : state_) {
            key += detail::kGolden;
            word = detail::mix64(key);
        }
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    /// Child stream, a pure function of (seed, stream_id, key).
    GaussianStream substream(std::uint64_t key) const noexcept {
        return GaussianStream(seed_, detail::mix64(stream_id_ * detail::kGolden + detail::mix64(key + 1)) ^
                                         0xbb67ae8584caa73bULL);
    }

    double operator()() noexcept { return next(); }

    double next() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u;
        double v;
        double s;
        do {
            u = signed_unit();
            v = signed_unit();
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    void fill(std::span<double> out) noexcept {
        for (double& x : out) {
            x = next();
        }
    }

  private:
    std::uint64_t next_bits() noexcept {
        const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl(state_[3], 45);
        return result;
    }

    // Uniform on (-1, 1) with 53 bits.
    double signed_unit() noexcept {
        return static_cast<double>(next_bits() >> 11) * 0x1.0p-52 - 1.0;
    }

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline std::vector<double> gaussian_draw(GaussianStream& stream, std::size_t count) {
    std::vector<double> out(count);
    stream.fill(out);
    return out;
}

/// Standard normal CDF.
inline double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Uniform variate on (0, 1) as Φ(Z) of the next normal in the stream.
inline double uniform_from(GaussianStream& stream) noexcept { return normal_cdf(stream.next()); }

}  // namespace widebnn
