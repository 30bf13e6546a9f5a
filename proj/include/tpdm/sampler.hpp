#pragma once

// The joint perpendicular sampler: one reverse-diffusion pass over a 3D
// volume in which every iteration applies either the primary model
// slice-wise along Axis3 (with optional DPS guidance) or the auxiliary
// model slice-wise along Axis1.  The mixing ratio K controls how often
// the auxiliary direction runs (about 1 step in K); K = infinity
// degenerates to per-slice 2D DPS with no cross-slice coupling.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "tpdm/guidance.hpp"
#include "tpdm/operators.hpp"
#include "tpdm/score.hpp"
#include "tpdm/volume.hpp"

namespace tpdm {

enum class Branch : std::uint8_t { Primary = 0, Auxiliary = 1 };

// Which branch runs at each discrete step i = N-1 .. 0.
struct StepPlan {
    // branch[i] is the branch taken at step index i (the plan is stored
    // by step index; execution visits indices in decreasing order).
    std::vector<Branch> branch;

    int primary_count() const;
    int auxiliary_count() const;
    // One char per step in execution order (i = N-1 first): 'P' / 'A'.
    std::string to_string() const;
};

// Integer K: auxiliary exactly when i % K == 0.  Non-integer K:
// independent Bernoulli draws with P(primary) = 1 - 1/K, keyed by
// (seed, Plan domain, i).  K = infinity: all primary.  Throws
// config_error for K <= 1 or N < 2.
StepPlan make_step_plan(int N, double K, std::uint64_t seed);

struct SamplerConfig {
    int N = 2000;               // discretization steps
    double K = 2.0;             // primary:auxiliary mixing ratio, > 1
    double lambda = 1.0;        // guidance step size; 0 disables guidance
    int corrector_steps = 0;    // Langevin steps after each predictor
    double corrector_snr = 0.16;
    std::uint64_t seed = 0;
    GuidanceMode guidance_mode = GuidanceMode::ExactVJP;
    bool normalize_residual = false;
    int check_every = 50;       // divergence check period (iterations)
};

struct RunResult {
    Volume3D X;
    StepPlan plan;
    // Sum over slices of |A(x_hat0) - y|^2 for each guided primary
    // step, in execution order.  Empty for unconditional runs.
    std::vector<double> residual_trace;
    nlohmann::json manifest;
};

// One primary-family update at step i: for every Axis3 slice, evaluate
// the primary model once at t_i, take the predictor step to level i-1
// (skipped at i = 0), run corrector_steps Langevin steps at the new
// level, then apply the DPS correction computed at the pre-step state.
// lambda = 0 skips the guidance computation entirely, reducing this to
// the unconditional primary sweep.
void primary_conditional_sweep(Volume3D& X, int i, const ScoreModel& model_p,
                               const OperatorHandle& op,
                               const MeasurementStack& Y,
                               const SamplerConfig& cfg);

// Unconditional primary sweep (identical to the above with lambda = 0).
void primary_sweep(Volume3D& X, int i, const ScoreModel& model_p,
                   const SamplerConfig& cfg);

// Auxiliary-family update at step i over Axis1 slices; never guided.
void auxiliary_sweep(Volume3D& X, int i, const ScoreModel& model_a,
                     const SamplerConfig& cfg);

// Full conditional run: X_{N-1} ~ N(0, sigma_max^2), then the planned
// branch at each i = N-1 .. 0.  Throws divergence_error when non-finite
// values appear (checked every cfg.check_every iterations and at the
// end), config_error on invalid settings, dim_error on a Y / operator /
// volume shape mismatch.
RunResult solve_inverse(const MeasurementStack& Y, const OperatorHandle& op,
                        const ScoreModel& model_p, const ScoreModel& model_a,
                        std::array<int, 3> shape, const SamplerConfig& cfg);

// Unconditional generation: the same loop with no measurement term.
RunResult generate(const ScoreModel& model_p, const ScoreModel& model_a,
                   std::array<int, 3> shape, const SamplerConfig& cfg);

} // namespace tpdm
