#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "tpdm/errors.hpp"
#include "tpdm/rng.hpp"
#include "tpdm/sde.hpp"

using namespace tpdm;

TEST_CASE("sigma hits the documented endpoints and geometric midpoint") {
    const NoiseSchedule sched; // 0.01 .. 378
    CHECK(sched.sigma(0.0) == 0.01);
    CHECK(sched.sigma(1.0) == 378.0);
    CHECK(sched.sigma(0.5) ==
          doctest::Approx(std::sqrt(0.01 * 378.0)).epsilon(1e-12));
}

TEST_CASE("sigma rejects t outside [0,1]") {
    const NoiseSchedule sched;
    CHECK_THROWS_AS(sched.sigma(-0.001), std::domain_error);
    CHECK_THROWS_AS(sched.sigma(1.001), std::domain_error);
}

TEST_CASE("sigma is strictly increasing in t") {
    const NoiseSchedule sched;
    double prev = sched.sigma(0.0);
    for (int k = 1; k <= 100; ++k) {
        const double cur = sched.sigma(k / 100.0);
        CHECK(cur > prev);
        prev = cur;
    }
}

TEST_CASE("discrete levels hit both endpoints exactly") {
    const NoiseSchedule sched(0.01, 378.0, 2000);
    CHECK(sched.sigma_at(0) == 0.01);
    CHECK(sched.sigma_at(1999) == 378.0);
    CHECK(sched.t_at(0) == 0.0);
    CHECK(sched.t_at(1999) == 1.0);
    CHECK_THROWS_AS(sched.sigma_at(-1), std::out_of_range);
    CHECK_THROWS_AS(sched.sigma_at(2000), std::out_of_range);
}

TEST_CASE("schedule construction validates its parameters") {
    CHECK_THROWS_AS(NoiseSchedule(0.0, 378.0, 2000), config_error);
    CHECK_THROWS_AS(NoiseSchedule(0.01, 0.01, 2000), config_error);
    CHECK_THROWS_AS(NoiseSchedule(1.0, 0.5, 2000), config_error);
    CHECK_THROWS_AS(NoiseSchedule(0.01, 378.0, 1), config_error);
}

TEST_CASE("perturb: zero noise returns x0; t=0 adds 0.01 z; 1 + 378 = 379") {
    const NoiseSchedule sched;
    Slice2D x0(2, 2, 1.0);
    const Slice2D zero(2, 2, 0.0);
    const Slice2D z1(2, 2, 1.0);

    const Slice2D same = perturb(x0, 0.7, zero, sched);
    for (const double v : same.data)
        CHECK(v == 1.0);

    const Slice2D low = perturb(x0, 0.0, z1, sched);
    for (const double v : low.data)
        CHECK(v == doctest::Approx(1.01).epsilon(1e-15));

    const Slice2D high = perturb(x0, 1.0, z1, sched);
    for (const double v : high.data)
        CHECK(v == doctest::Approx(379.0).epsilon(1e-15));
}

TEST_CASE("perturb rejects shape mismatches") {
    const NoiseSchedule sched;
    const Slice2D x0(2, 2);
    const Slice2D z(2, 3);
    CHECK_THROWS_AS(perturb(x0, 0.5, z, sched), dim_error);
    const Volume3D v0(2, 2, 2);
    const Volume3D zv(2, 2, 3);
    CHECK_THROWS_AS(perturb(v0, 0.5, zv, sched), dim_error);
}

TEST_CASE("tweedie_denoise: zero score is the identity") {
    Slice2D x(2, 2, 2.0);
    const Slice2D zero(2, 2, 0.0);
    const Slice2D out = tweedie_denoise(x, 1.3, zero);
    for (const double v : out.data)
        CHECK(v == 2.0);
}

TEST_CASE("tweedie_denoise matches the conjugate-Gaussian posterior mean") {
    // Prior N(0, I), sigma = 1, x_t = 2: score = -x/(1+1) = -1, so
    // x_hat0 = 2 - 1 = 1 = x_t * tau^2/(tau^2 + sigma^2).
    Slice2D x(1, 1, 2.0);
    Slice2D score(1, 1, -1.0);
    const Slice2D out = tweedie_denoise(x, 1.0, score);
    CHECK(out.at(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("tweedie_denoise with sigma=0 is the identity for any score") {
    Slice2D x(1, 2);
    x.at(0, 0) = -3.5;
    x.at(0, 1) = 7.25;
    Slice2D score(1, 2, 123.0);
    const Slice2D out = tweedie_denoise(x, 0.0, score);
    CHECK(out.at(0, 0) == -3.5);
    CHECK(out.at(0, 1) == 7.25);
}

TEST_CASE("predictor_step: zero score and zero noise is the identity") {
    const NoiseSchedule sched(0.01, 378.0, 10);
    std::vector<double> x = {1.0, -2.0, 3.0};
    const std::vector<double> zero(3, 0.0);
    predictor_step(x, 5, zero, zero, sched);
    CHECK(x[0] == 1.0);
    CHECK(x[1] == -2.0);
    CHECK(x[2] == 3.0);
}

TEST_CASE("predictor_step N=2 closed form") {
    // sigma_1 = 378, sigma_0 = 0.01; x = 0, score = c, z = 0
    //  -> x' = (378^2 - 0.01^2) c.
    const NoiseSchedule sched(0.01, 378.0, 2);
    const double c = 0.5;
    std::vector<double> x = {0.0};
    const std::vector<double> score = {c};
    const std::vector<double> zero = {0.0};
    predictor_step(x, 1, score, zero, sched);
    CHECK(x[0] ==
          doctest::Approx((378.0 * 378.0 - 0.01 * 0.01) * c).epsilon(1e-12));
}

TEST_CASE("predictor_step rejects i = 0 and out-of-range steps") {
    const NoiseSchedule sched(0.01, 378.0, 10);
    std::vector<double> x = {1.0};
    const std::vector<double> zero = {0.0};
    CHECK_THROWS_AS(predictor_step(x, 0, zero, zero, sched),
                    std::out_of_range);
    CHECK_THROWS_AS(predictor_step(x, 10, zero, zero, sched),
                    std::out_of_range);
}

TEST_CASE("predictor chain with the analytic linear score preserves E[x]") {
    // score(x) = -(x - mu)/(tau^2 + sigma_i^2) makes the update affine in
    // x with fixed point mu; averaging many chains the mean stays ~mu.
    const double mu = 3.0, tau = 1.0;
    const int N = 20, chains = 400, P = 16;
    const NoiseSchedule sched(0.01, 5.0, N);
    double sum = 0.0;
    long count = 0;
    for (int k = 0; k < chains; ++k) {
        std::vector<double> x(P), z(P), s(P);
        rng_gaussian_fill(x, 500 + static_cast<std::uint64_t>(k),
                          RngDomain::Test, 0, 0);
        for (double& v : x)
            v = mu + sched.sigma_at(N - 1) * v;
        for (int i = N - 1; i >= 1; --i) {
            const double sig = sched.sigma_at(i);
            for (int p = 0; p < P; ++p)
                s[static_cast<std::size_t>(p)] =
                    -(x[static_cast<std::size_t>(p)] - mu) /
                    (tau * tau + sig * sig);
            rng_gaussian_fill(z, 900 + static_cast<std::uint64_t>(k),
                              RngDomain::Test,
                              static_cast<std::uint64_t>(i), 0);
            predictor_step(x, i, s, z, sched);
        }
        for (const double v : x) {
            sum += v;
            ++count;
        }
    }
    const double mean = sum / static_cast<double>(count);
    // Final per-element std ~ sqrt(tau^2 + sigma_0^2) ~ 1.
    const double se = 1.0 / std::sqrt(static_cast<double>(count));
    CHECK(std::abs(mean - mu) < 4.0 * se);
}

TEST_CASE("corrector_step flags an identically zero score") {
    std::vector<double> x = {1.0, 2.0};
    const std::vector<double> zero = {0.0, 0.0};
    const std::vector<double> z = {0.3, -0.4};
    const bool moved = corrector_step(x, zero, z, 0.16);
    CHECK_FALSE(moved);
    CHECK(x[0] == 1.0);
    CHECK(x[1] == 2.0);
}

TEST_CASE("corrector_step with snr -> 0 leaves x nearly unchanged") {
    std::vector<double> x = {1.0, 2.0};
    const std::vector<double> s = {0.5, -0.5};
    const std::vector<double> z = {1.0, 1.0};
    const bool moved = corrector_step(x, s, z, 1e-12);
    CHECK(moved);
    CHECK(std::abs(x[0] - 1.0) < 1e-9);
    CHECK(std::abs(x[1] - 2.0) < 1e-9);
}

TEST_CASE("corrector-only iteration approaches the annealed stationary law") {
    // At fixed sigma with the analytic Gaussian score the corrector is
    // Langevin dynamics for N(mu, (tau^2 + sigma^2) I); the finite
    // snr=0.16 step keeps the ensemble variance within 15% of the
    // target.
    const double mu = 1.0, tau = 1.0, sigma = 1.0;
    const double target_var = tau * tau + sigma * sigma;
    const int chains = 300, steps = 50, P = 64;
    double sum = 0.0, sumsq = 0.0;
    long count = 0;
    for (int k = 0; k < chains; ++k) {
        std::vector<double> x(P), z(P), s(P);
        rng_gaussian_fill(x, 1000 + static_cast<std::uint64_t>(k),
                          RngDomain::Test, 0, 0);
        for (double& v : x)
            v = mu + std::sqrt(target_var) * v * 0.8; // start mildly narrow
        for (int it = 0; it < steps; ++it) {
            for (int p = 0; p < P; ++p)
                s[static_cast<std::size_t>(p)] =
                    -(x[static_cast<std::size_t>(p)] - mu) / target_var;
            rng_gaussian_fill(z, 2000 + static_cast<std::uint64_t>(k),
                              RngDomain::Test,
                              static_cast<std::uint64_t>(it), 0);
            corrector_step(x, s, z, 0.16);
        }
        for (const double v : x) {
            sum += v;
            sumsq += v * v;
            ++count;
        }
    }
    const double mean = sum / static_cast<double>(count);
    const double var = sumsq / static_cast<double>(count) - mean * mean;
    CHECK(std::abs(mean - mu) <
          4.0 * std::sqrt(target_var / static_cast<double>(count)));
    CHECK(var > 0.85 * target_var);
    CHECK(var < 1.15 * target_var);
}
