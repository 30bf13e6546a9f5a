#include "tpdm/sde.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "tpdm/errors.hpp"

namespace tpdm {

namespace {

void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b)
        throw dim_error(std::string(what) + ": size mismatch (" +
                        std::to_string(a) + " vs " + std::to_string(b) + ")");
}

} // namespace

NoiseSchedule::NoiseSchedule(double sigma_min_, double sigma_max_, int N_)
    : sigma_min(sigma_min_), sigma_max(sigma_max_), N(N_) {
    if (!(sigma_min > 0.0))
        throw config_error("sigma_min must be > 0");
    if (!(sigma_max > sigma_min))
        throw config_error("sigma_max must be > sigma_min");
    if (N < 2)
        throw config_error("schedule step count N must be >= 2");
}

double NoiseSchedule::sigma(double t) const {
    if (!(t >= 0.0 && t <= 1.0))
        throw std::domain_error("schedule time t=" + std::to_string(t) +
                                " outside [0, 1]");
    return sigma_min * std::pow(sigma_max / sigma_min, t);
}

double NoiseSchedule::t_at(int i) const {
    if (i < 0 || i >= N)
        throw std::out_of_range("schedule index " + std::to_string(i) +
                                " outside [0, " + std::to_string(N - 1) + "]");
    return static_cast<double>(i) / (N - 1);
}

double NoiseSchedule::sigma_at(int i) const { return sigma(t_at(i)); }

void perturb(std::span<const double> x0, double t, std::span<const double> z,
             const NoiseSchedule& sched, std::span<double> out) {
    require_same_size(x0.size(), z.size(), "perturb");
    require_same_size(x0.size(), out.size(), "perturb");
    const double s = sched.sigma(t);
    for (std::size_t i = 0; i < x0.size(); ++i)
        out[i] = x0[i] + s * z[i];
}

Slice2D perturb(const Slice2D& x0, double t, const Slice2D& z,
                const NoiseSchedule& sched) {
    if (x0.h != z.h || x0.w != z.w)
        throw dim_error("perturb: slice shape mismatch");
    Slice2D out(x0.h, x0.w);
    perturb(x0.data, t, z.data, sched, out.data);
    return out;
}

Volume3D perturb(const Volume3D& x0, double t, const Volume3D& z,
                 const NoiseSchedule& sched) {
    if (x0.shape() != z.shape())
        throw dim_error("perturb: volume shape mismatch");
    Volume3D out(x0.d1, x0.d2, x0.d3);
    perturb(x0.data, t, z.data, sched, out.data);
    return out;
}

void tweedie_denoise(std::span<const double> x_t, double sigma_t,
                     std::span<const double> score, std::span<double> out) {
    require_same_size(x_t.size(), score.size(), "tweedie_denoise");
    require_same_size(x_t.size(), out.size(), "tweedie_denoise");
    const double s2 = sigma_t * sigma_t;
    for (std::size_t i = 0; i < x_t.size(); ++i)
        out[i] = x_t[i] + s2 * score[i];
}

Slice2D tweedie_denoise(const Slice2D& x_t, double sigma_t,
                        const Slice2D& score) {
    if (x_t.h != score.h || x_t.w != score.w)
        throw dim_error("tweedie_denoise: slice shape mismatch");
    Slice2D out(x_t.h, x_t.w);
    tweedie_denoise(x_t.data, sigma_t, score.data, out.data);
    return out;
}

void predictor_step(std::span<double> x, int i, std::span<const double> score,
                    std::span<const double> z, const NoiseSchedule& sched) {
    if (i == 0)
        throw std::out_of_range(
            "predictor_step: no level below step index 0");
    const double si = sched.sigma_at(i);       // also range-checks i
    const double sim1 = sched.sigma_at(i - 1);
    require_same_size(x.size(), score.size(), "predictor_step");
    require_same_size(x.size(), z.size(), "predictor_step");
    const double dvar = si * si - sim1 * sim1;
    const double noise_scale = std::sqrt(dvar);
    for (std::size_t k = 0; k < x.size(); ++k)
        x[k] += dvar * score[k] + noise_scale * z[k];
}

bool corrector_step(std::span<double> x, std::span<const double> score,
                    std::span<const double> z, double snr) {
    if (!(snr > 0.0))
        throw config_error("corrector snr must be > 0");
    require_same_size(x.size(), score.size(), "corrector_step");
    require_same_size(x.size(), z.size(), "corrector_step");
    double z_sq = 0.0, s_sq = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        z_sq += z[k] * z[k];
        s_sq += score[k] * score[k];
    }
    if (s_sq == 0.0)
        return false; // zero score: eps undefined, leave x unchanged
    const double ratio = snr * std::sqrt(z_sq) / std::sqrt(s_sq);
    const double eps = 2.0 * ratio * ratio;
    const double noise_scale = std::sqrt(2.0 * eps);
    for (std::size_t k = 0; k < x.size(); ++k)
        x[k] += eps * score[k] + noise_scale * z[k];
    return true;
}

} // namespace tpdm
