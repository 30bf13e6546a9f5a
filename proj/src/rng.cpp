#include "tpdm/rng.hpp"

#include <cmath>
#include <numbers>

namespace tpdm {

double rng_gaussian(std::uint64_t seed, RngDomain domain, std::uint64_t key_a,
                    std::uint64_t key_b, std::uint64_t idx) {
    const double u1 = rng_uniform(seed, domain, key_a, key_b, 2 * idx);
    const double u2 = rng_uniform(seed, domain, key_a, key_b, 2 * idx + 1);
    // u1 < 1 always, so log1p(-u1) is finite.
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    return r * std::cos(2.0 * std::numbers::pi * u2);
}

void rng_gaussian_fill(std::span<double> out, std::uint64_t seed,
                       RngDomain domain, std::uint64_t key_a,
                       std::uint64_t key_b, std::uint64_t base_idx) {
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = rng_gaussian(seed, domain, key_a, key_b, base_idx + i);
}

} // namespace tpdm
