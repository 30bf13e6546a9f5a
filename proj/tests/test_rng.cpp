#include "doctest.h"

#include <bit>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "tpdm/rng.hpp"

using namespace tpdm;

TEST_CASE("rng_hash is a pure function of its five inputs") {
    const std::uint64_t a = rng_hash(1, RngDomain::Test, 2, 3, 4);
    CHECK(a == rng_hash(1, RngDomain::Test, 2, 3, 4));
    CHECK(a != rng_hash(2, RngDomain::Test, 2, 3, 4));
    CHECK(a != rng_hash(1, RngDomain::Init, 2, 3, 4));
    CHECK(a != rng_hash(1, RngDomain::Test, 3, 3, 4));
    CHECK(a != rng_hash(1, RngDomain::Test, 2, 4, 4));
    CHECK(a != rng_hash(1, RngDomain::Test, 2, 3, 5));
}

TEST_CASE("rng_hash avalanche: flipping one input bit flips ~half the output") {
    int total = 0;
    int n = 0;
    for (std::uint64_t k = 0; k < 64; ++k) {
        const std::uint64_t base = rng_hash(99, RngDomain::Test, 5, 6, 7);
        const std::uint64_t flip =
            rng_hash(99, RngDomain::Test, 5, 6, 7 ^ (1ull << k));
        total += std::popcount(base ^ flip);
        ++n;
    }
    const double mean_flips = static_cast<double>(total) / n;
    CHECK(mean_flips > 24.0);
    CHECK(mean_flips < 40.0);
}

TEST_CASE("rng_uniform lies in [0,1) with the right first moments") {
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = rng_uniform(123, RngDomain::Test, 0, 0,
                                     static_cast<std::uint64_t>(i));
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
        sumsq += u * u;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    // 3-sigma Monte-Carlo bands: se(mean) = sqrt(1/12/n) ~ 6.5e-4.
    CHECK(std::abs(mean - 0.5) < 3.0 * std::sqrt(1.0 / 12.0 / n));
    CHECK(std::abs(var - 1.0 / 12.0) < 0.002);
}

TEST_CASE("rng_gaussian has standard-normal moments") {
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0, sumcube = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = rng_gaussian(7, RngDomain::Test, 1, 2,
                                      static_cast<std::uint64_t>(i));
        sum += g;
        sumsq += g * g;
        sumcube += g * g * g;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    const double skew = sumcube / n;
    CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(var - 1.0) < 0.02);
    CHECK(std::abs(skew) < 0.05);
}

TEST_CASE("rng_gaussian is finite for every index (log1p guards u=0)") {
    // The Box-Muller radius uses log1p(-u); u = 1 - 2^-53 is the worst
    // representable case and must stay finite.
    for (std::uint64_t i = 0; i < 10000; ++i)
        CHECK(std::isfinite(rng_gaussian(0, RngDomain::Test, 9, 9, i)));
}

TEST_CASE("rng_gaussian_fill equals elementwise draws at shifted base_idx") {
    std::vector<double> bulk(100, 0.0);
    rng_gaussian_fill(bulk, 42, RngDomain::Test, 3, 4, 0);

    // Any sub-range filled with the matching base index is identical.
    std::vector<double> part(40, 0.0);
    rng_gaussian_fill(part, 42, RngDomain::Test, 3, 4, 25);
    for (int i = 0; i < 40; ++i)
        CHECK(part[static_cast<std::size_t>(i)] ==
              bulk[static_cast<std::size_t>(25 + i)]);

    for (int i = 0; i < 100; ++i)
        CHECK(bulk[static_cast<std::size_t>(i)] ==
              rng_gaussian(42, RngDomain::Test, 3, 4,
                           static_cast<std::uint64_t>(i)));
}

TEST_CASE("distinct domains give distinct streams") {
    std::set<std::uint64_t> seen;
    for (const RngDomain d :
         {RngDomain::Init, RngDomain::Plan, RngDomain::Predictor,
          RngDomain::Corrector, RngDomain::TrainBatch, RngDomain::TrainTime,
          RngDomain::TrainNoise, RngDomain::ParamInit, RngDomain::Phantom,
          RngDomain::Mask, RngDomain::Test, RngDomain::MeasNoise})
        seen.insert(rng_hash(11, d, 0, 0, 0));
    CHECK(seen.size() == 12);
}
