#pragma once

// Variance-exploding SDE machinery: the geometric noise schedule, the
// forward perturbation kernel, the Tweedie posterior-mean denoiser, and
// the reverse-time predictor / Langevin corrector steps.
//
// All functions are pure; randomness enters only through caller-supplied
// noise fields.

#include <span>

#include "tpdm/volume.hpp"

namespace tpdm {

// sigma(t) = sigma_min * (sigma_max/sigma_min)^t on t in [0, 1].
// Discretized as sigma_i = sigma(i/(N-1)), i = 0..N-1, so both
// endpoints are hit exactly.
struct NoiseSchedule {
    double sigma_min = 0.01;
    double sigma_max = 378.0;
    int N = 2000;

    NoiseSchedule() = default;
    NoiseSchedule(double sigma_min_, double sigma_max_, int N_);

    // Throws std::domain_error for t outside [0, 1].
    double sigma(double t) const;

    // Discrete level i in [0, N-1]; throws std::out_of_range otherwise.
    double sigma_at(int i) const;
    double t_at(int i) const;
};

// x0 + sigma(t) * z, elementwise.  Shapes must match.
void perturb(std::span<const double> x0, double t, std::span<const double> z,
             const NoiseSchedule& sched, std::span<double> out);
Slice2D perturb(const Slice2D& x0, double t, const Slice2D& z,
                const NoiseSchedule& sched);
Volume3D perturb(const Volume3D& x0, double t, const Volume3D& z,
                 const NoiseSchedule& sched);

// Tweedie posterior-mean estimate: x_hat0 = x_t + sigma_t^2 * score.
void tweedie_denoise(std::span<const double> x_t, double sigma_t,
                     std::span<const double> score, std::span<double> out);
Slice2D tweedie_denoise(const Slice2D& x_t, double sigma_t,
                        const Slice2D& score);

// Reverse-diffusion (ancestral VE) predictor from level i to i-1:
//   x' = x + (sigma_i^2 - sigma_{i-1}^2) * score
//          + sqrt(sigma_i^2 - sigma_{i-1}^2) * z.
// Valid for 1 <= i <= N-1; i = 0 throws std::out_of_range (there is no
// level below it).  The noise term is applied at the final 1 -> 0
// transition like any other; no noise is added after the loop ends.
void predictor_step(std::span<double> x, int i, std::span<const double> score,
                    std::span<const double> z, const NoiseSchedule& sched);

// One annealed-Langevin corrector step at fixed sigma:
//   eps = 2 * (snr * |z| / |score|)^2,  x' = x + eps*score + sqrt(2 eps)*z.
// Returns false (leaving x unchanged) when the score is identically
// zero, in which case eps is undefined.
bool corrector_step(std::span<double> x, std::span<const double> score,
                    std::span<const double> z, double snr);

} // namespace tpdm
