#pragma once

// DPS measurement-consistency guidance: the gradient of
// |A(x_hat0(x)) - y|^2 with respect to x, where x_hat0 is the Tweedie
// estimate.  ExactVJP differentiates through the score model
// (d x_hat0 / d x = I + sigma^2 dS/dx); IdentityJacobian drops the score
// Jacobian as a documented cheap approximation.

#include "tpdm/operators.hpp"
#include "tpdm/score.hpp"

namespace tpdm {

enum class GuidanceMode { ExactVJP, IdentityJacobian };

struct GuidanceConfig {
    double lambda = 1.0;
    GuidanceMode mode = GuidanceMode::ExactVJP;
    bool normalize_residual = false;
};

// grad_x |A(x_hat0) - y|^2 with x_hat0 = x + sigma(t)^2 * model.eval(x, t):
//   u = 2 A^T (A x_hat0 - y)
//   ExactVJP:          u + sigma^2 * model.vjp(x, t, u)
//   IdentityJacobian:  u
// With normalize_residual the result is divided by |A(x_hat0) - y|; a
// zero residual returns the zero gradient (consistent point).
Slice2D dps_grad(const ScoreModel& model, const MeasurementOperator& op,
                 const Slice2D& x, const Measurement2D& y, double t,
                 const GuidanceConfig& cfg);

// Same computation reusing an already-evaluated score at (x, t); the
// sampler shares one model evaluation between Tweedie, predictor, and
// guidance.  When residual_sq is non-null it receives
// |A(x_hat0) - y|^2 (before any normalization).
Slice2D dps_grad_with_score(const ScoreModel& model,
                            const MeasurementOperator& op, const Slice2D& x,
                            const Slice2D& score, const Measurement2D& y,
                            double t, const GuidanceConfig& cfg,
                            double* residual_sq = nullptr);

// x'' = x' - lambda * grad (Algorithm 1's measurement-consistency line).
Slice2D dps_update(const Slice2D& x_prime, const Slice2D& grad,
                   double lambda);

} // namespace tpdm
