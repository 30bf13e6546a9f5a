#include "tpdm/guidance.hpp"

#include <cmath>

#include "tpdm/errors.hpp"

namespace tpdm {

Slice2D dps_grad_with_score(const ScoreModel& model,
                            const MeasurementOperator& op, const Slice2D& x,
                            const Slice2D& score, const Measurement2D& y,
                            double t, const GuidanceConfig& cfg,
                            double* residual_sq) {
    if (score.h != x.h || score.w != x.w)
        throw dim_error("dps_grad: score shape mismatch");
    const double sigma = model.schedule().sigma(t);
    const Slice2D x_hat0 = tweedie_denoise(x, sigma, score);

    Measurement2D r = op.apply(x_hat0);
    if (r.h != y.h || r.w != y.w || r.complex_valued != y.complex_valued)
        throw dim_error("dps_grad: measurement shape mismatch");
    double sq = 0.0;
    for (std::size_t i = 0; i < r.re.size(); ++i) {
        r.re[i] -= y.re[i];
        sq += r.re[i] * r.re[i];
    }
    for (std::size_t i = 0; i < r.im.size(); ++i) {
        r.im[i] -= y.im[i];
        sq += r.im[i] * r.im[i];
    }
    if (residual_sq)
        *residual_sq = sq;

    Slice2D g = op.adjoint(r);
    for (double& v : g.data)
        v *= 2.0;

    if (cfg.mode == GuidanceMode::ExactVJP) {
        // Chain rule through x_hat0 = x + sigma^2 s(x):
        // grad = (I + sigma^2 dS/dx)^T u.
        const Slice2D pullback = model.vjp(x, t, g);
        const double s2 = sigma * sigma;
        for (std::size_t i = 0; i < g.size(); ++i)
            g.data[i] += s2 * pullback.data[i];
    }

    if (cfg.normalize_residual) {
        if (sq == 0.0)
            return Slice2D(x.h, x.w); // consistent point: zero gradient
        const double inv = 1.0 / std::sqrt(sq);
        for (double& v : g.data)
            v *= inv;
    }
    return g;
}

Slice2D dps_grad(const ScoreModel& model, const MeasurementOperator& op,
                 const Slice2D& x, const Measurement2D& y, double t,
                 const GuidanceConfig& cfg) {
    return dps_grad_with_score(model, op, x, model.eval(x, t), y, t, cfg);
}

Slice2D dps_update(const Slice2D& x_prime, const Slice2D& grad,
                   double lambda) {
    if (grad.h != x_prime.h || grad.w != x_prime.w)
        throw dim_error("dps_update: gradient shape mismatch");
    Slice2D out = x_prime;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] -= lambda * grad.data[i];
    return out;
}

} // namespace tpdm
