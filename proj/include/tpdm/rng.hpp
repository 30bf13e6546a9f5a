#pragma once

// Counter-based random number generation.
//
// Every random draw in the project is a pure function of
// (seed, domain, key_a, key_b, counter).  There is no generator state to
// advance, so draws can be made in any order, from any thread, and the
// result is identical — this is what makes runs bit-reproducible
// independent of the thread count.

#include <cstdint>
#include <span>

namespace tpdm {

// Disjoint stream labels.  Adding new call sites means adding a new
// domain here, never reusing an existing one with different keys.
enum class RngDomain : std::uint64_t {
    Init = 1,        // initial X_N ~ N(0, sigma_max^2) field
    Plan = 2,        // Bernoulli branch draws for real-valued K
    Predictor = 3,   // predictor noise, keyed by (step|axis, slice)
    Corrector = 4,   // corrector noise, keyed by (step<<8|substep, ...)
    TrainBatch = 5,  // dataset indices per training iteration
    TrainTime = 6,   // per-sample t ~ U[1e-5, 1]
    TrainNoise = 7,  // per-sample DSM perturbation field
    ParamInit = 8,   // network weight initialization
    Phantom = 9,     // ellipsoid parameters
    Mask = 10,       // k-space mask dart throwing
    Test = 11,       // scratch draws inside the test suites
    MeasNoise = 12,  // simulated measurement noise
};

// 64-bit finalizer from splitmix64; full avalanche.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

// Absorb one word into the running hash state.
constexpr std::uint64_t rng_absorb(std::uint64_t h, std::uint64_t w) {
    return mix64(h ^ (w + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2)));
}

// The core hash: five words in, one uniformly mixed word out.
constexpr std::uint64_t rng_hash(std::uint64_t seed, RngDomain domain,
                                 std::uint64_t key_a, std::uint64_t key_b,
                                 std::uint64_t counter) {
    std::uint64_t h = mix64(seed + 0x9e3779b97f4a7c15ull);
    h = rng_absorb(h, static_cast<std::uint64_t>(domain));
    h = rng_absorb(h, key_a);
    h = rng_absorb(h, key_b);
    h = rng_absorb(h, counter);
    return h;
}

// Uniform draw in [0, 1): the top 53 bits scaled down.
constexpr double rng_uniform(std::uint64_t seed, RngDomain domain,
                             std::uint64_t key_a, std::uint64_t key_b,
                             std::uint64_t counter) {
    return static_cast<double>(rng_hash(seed, domain, key_a, key_b, counter)
                               >> 11)
           * 0x1.0p-53;
}

// Standard normal draw for element index `idx` within the keyed stream.
// Uses the cosine branch of Box–Muller on uniforms at counters
// (2*idx, 2*idx+1), so each element is independent of evaluation order.
double rng_gaussian(std::uint64_t seed, RngDomain domain, std::uint64_t key_a,
                    std::uint64_t key_b, std::uint64_t idx);

// Fill `out[i]` with standard normals at element indices base_idx + i.
void rng_gaussian_fill(std::span<double> out, std::uint64_t seed,
                       RngDomain domain, std::uint64_t key_a,
                       std::uint64_t key_b, std::uint64_t base_idx = 0);

} // namespace tpdm
