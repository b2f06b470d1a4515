#include "colsim/rng.hpp"

#include <cmath>

namespace colsim
{

std::uint32_t RandomStream::below(std::uint32_t bound)
{
    const std::uint32_t threshold = static_cast<std::uint32_t>(-bound) % bound;
    for (;;)
    {
        const std::uint64_t m = (next() >> 32) * std::uint64_t{bound};
        if (static_cast<std::uint32_t>(m) >= threshold)
        {
            return static_cast<std::uint32_t>(m >> 32);
        }
    }
}

namespace
{

// q^n must stay comfortably above the smallest normal double.
constexpr double min_log_start = -600.0;

std::uint32_t binomial_small_p(RandomStream &rng, std::uint32_t n, double p)
{
    const double q = 1.0 - p;
    const double log_start = n * std::log(q);
    if (log_start < min_log_start)
    {
        const std::uint32_t half = n / 2;
        const std::uint32_t a = binomial_small_p(rng, half, p);
        return a + binomial_small_p(rng, n - half, p);
    }
    const double ratio = p / q;
    double pmf = std::pow(q, static_cast<double>(n));
    double cdf = pmf;
    const double u = rng.uniform();
    std::uint32_t k = 0;
    while (u >= cdf && k < n)
    {
        pmf *= static_cast<double>(n - k) / static_cast<double>(k + 1) * ratio;
        ++k;
        cdf += pmf;
        if (pmf == 0.0)
        {
            break;
        }
    }
    return k;
}

} // namespace

std::uint32_t sample_binomial(RandomStream &rng, std::uint32_t n, double p)
{
    if (n == 0 || p <= 0.0)
    {
        return 0;
    }
    if (p >= 1.0)
    {
        return n;
    }
    if (p > 0.5)
    {
        return n - binomial_small_p(rng, n, 1.0 - p);
    }
    return binomial_small_p(rng, n, p);
}

std::uint32_t sample_poisson(RandomStream &rng, double lambda, double exp_neg_lambda)
{
    if (lambda <= 0.0)
    {
        return 0;
    }
    if (-lambda < min_log_start)
    {
        const double half = 0.5 * lambda;
        const double e = std::exp(-half);
        const std::uint32_t a = sample_poisson(rng, half, e);
        return a + sample_poisson(rng, half, e);
    }
    const double u = rng.uniform();
    double pmf = exp_neg_lambda;
    double cdf = pmf;
    std::uint32_t k = 0;
    while (u >= cdf)
    {
        ++k;
        pmf *= lambda / k;
        cdf += pmf;
        if (pmf == 0.0)
        {
            break;
        }
    }
    return k;
}

} // namespace colsim
