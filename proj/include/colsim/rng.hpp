#pragma once

// Counter-based random streams. A stream is keyed by (seed, kind, a, b) so
// any worker can regenerate any draw without coordination.

#include <cstdint>

namespace colsim
{

inline constexpr std::uint64_t splitmix_increment = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t splitmix_finalize(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// SplitMix64. Same state, same sequence, on every platform.
class RandomStream
{
  public:
    constexpr explicit RandomStream(std::uint64_t state)
        : state_(state)
    {
    }

    constexpr std::uint64_t next()
    {
        state_ += splitmix_increment;
        return splitmix_finalize(state_);
    }

    /// Uniform in [0, 1) with 53 bits of resolution.
    constexpr double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound), bound > 0. Lemire's multiply-shift
    /// with rejection, so the result is exactly uniform.
    std::uint32_t below(std::uint32_t bound);

    constexpr std::uint64_t state() const { return state_; }

  private:
    std::uint64_t state_;
};

enum class StreamKind : std::uint64_t
{
    synapse = 1,
    external = 2,
};

/// Tag mixing order: h0 = first output of a stream seeded with `seed`;
/// h1 = first output seeded with h0 ^ kind; h2 with h1 ^ a; tag = first
/// output seeded with h2 ^ b.
constexpr std::uint64_t tag_mix(std::uint64_t x)
{
    return splitmix_finalize(x + splitmix_increment);
}

/// The part of stream_tag that depends on (seed, kind, a) only; finish with
/// tag_mix(prefix ^ b).
constexpr std::uint64_t stream_tag_prefix(StreamKind kind, std::uint64_t a, std::uint64_t seed)
{
    return tag_mix(tag_mix(tag_mix(seed) ^ static_cast<std::uint64_t>(kind)) ^ a);
}

constexpr std::uint64_t stream_tag(StreamKind kind, std::uint64_t a, std::uint64_t b, std::uint64_t seed)
{
    return tag_mix(stream_tag_prefix(kind, a, seed) ^ b);
}

/// Binomial(n, p) by inverse CDF with a running pmf product. Uses the
/// smaller tail probability and splits n when q^n would underflow.
std::uint32_t sample_binomial(RandomStream &rng, std::uint32_t n, double p);

/// Poisson(lambda) by inverse CDF; `exp_neg_lambda` = exp(-lambda).
std::uint32_t sample_poisson(RandomStream &rng, double lambda, double exp_neg_lambda);

} // namespace colsim
