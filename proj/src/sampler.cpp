#include "tpdm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>

#include "tpdm/errors.hpp"
#include "tpdm/rng.hpp"
#include "tpdm/sde.hpp"
#include "tpdm/thread_pool.hpp"

namespace tpdm {

int StepPlan::primary_count() const {
    return static_cast<int>(
        std::count(branch.begin(), branch.end(), Branch::Primary));
}

int StepPlan::auxiliary_count() const {
    return static_cast<int>(branch.size()) - primary_count();
}

std::string StepPlan::to_string() const {
    std::string s;
    s.reserve(branch.size());
    for (std::size_t k = branch.size(); k-- > 0;)
        s.push_back(branch[k] == Branch::Primary ? 'P' : 'A');
    return s;
}

StepPlan make_step_plan(int N, double K, std::uint64_t seed) {
    if (N < 2)
        throw config_error("step plan: N must be >= 2, got " +
                           std::to_string(N));
    if (std::isnan(K) || K <= 1.0)
        throw config_error("step plan: K must be > 1, got " +
                           std::to_string(K));
    StepPlan plan;
    plan.branch.assign(static_cast<std::size_t>(N), Branch::Primary);
    if (std::isinf(K) || K > 1e15)
        return plan; // per-slice DPS limit: never visit the auxiliary axis
    if (K == std::floor(K)) {
        const long long Ki = static_cast<long long>(K);
        for (int i = 0; i < N; ++i)
            if (i % Ki == 0)
                plan.branch[static_cast<std::size_t>(i)] = Branch::Auxiliary;
    } else {
        const double p_primary = 1.0 - 1.0 / K;
        for (int i = 0; i < N; ++i) {
            const double u = rng_uniform(seed, RngDomain::Plan,
                                         static_cast<std::uint64_t>(i), 0, 0);
            if (!(u < p_primary))
                plan.branch[static_cast<std::size_t>(i)] = Branch::Auxiliary;
        }
    }
    return plan;
}

namespace {

constexpr std::uint64_t kPrimaryTag = 0;
constexpr std::uint64_t kAuxiliaryTag = 1;

void validate_config(const SamplerConfig& cfg) {
    if (cfg.N < 2)
        throw config_error("sampler: N must be >= 2");
    if (std::isnan(cfg.K) || cfg.K <= 1.0)
        throw config_error("sampler: K must be > 1");
    if (cfg.lambda < 0.0 || !std::isfinite(cfg.lambda))
        throw config_error("sampler: lambda must be finite and >= 0");
    if (cfg.corrector_steps < 0 || cfg.corrector_steps > 255)
        throw config_error("sampler: corrector_steps must be in [0, 255]");
    if (!(cfg.corrector_snr > 0.0))
        throw config_error("sampler: corrector_snr must be > 0");
    if (cfg.check_every < 1)
        throw config_error("sampler: check_every must be >= 1");
}

NoiseSchedule sampler_schedule(const ScoreModel& model_p,
                               const ScoreModel& model_a,
                               const SamplerConfig& cfg) {
    const NoiseSchedule& sp = model_p.schedule();
    const NoiseSchedule& sa = model_a.schedule();
    if (sp.sigma_min != sa.sigma_min || sp.sigma_max != sa.sigma_max)
        throw config_error(
            "sampler: primary and auxiliary models disagree on the noise "
            "schedule (sigma_min/sigma_max)");
    return NoiseSchedule(sp.sigma_min, sp.sigma_max, cfg.N);
}

// One slice-family update at step i.  Returns the summed squared
// residual over slices when guided, 0 otherwise.
double sweep(Volume3D& X, int i, const ScoreModel& model, SliceAxis axis,
             const OperatorHandle* op, const MeasurementStack* Y,
             const SamplerConfig& cfg, const NoiseSchedule& sched) {
    if (i < 0 || i >= cfg.N)
        throw std::out_of_range("sweep: step index " + std::to_string(i) +
                                " outside [0, " + std::to_string(cfg.N) + ")");
    const int n_slices = X.extent(axis);
    const bool guided = op != nullptr && Y != nullptr && cfg.lambda != 0.0;
    const std::uint64_t axis_tag =
        axis == SliceAxis::Axis3 ? kPrimaryTag : kAuxiliaryTag;
    const double t = sched.t_at(i);
    const double t_corr = sched.t_at(std::max(i - 1, 0));
    const GuidanceConfig gcfg{cfg.lambda, cfg.guidance_mode,
                              cfg.normalize_residual};

    std::vector<double> rsq(guided ? static_cast<std::size_t>(n_slices) : 0,
                            0.0);

    ThreadPool::global().parallel_for(
        static_cast<std::size_t>(n_slices),
        [&](std::size_t begin, std::size_t end) {
            for (std::size_t js = begin; js < end; ++js) {
                const int j = static_cast<int>(js);
                const std::uint64_t slice_key =
                    (axis_tag << 32) | static_cast<std::uint64_t>(j);
                Slice2D x = slice_extract(X, axis, j);
                const Slice2D s = model.eval(x, t);

                Slice2D g;
                if (guided) {
                    const Measurement2D yj = stack_plane(*Y, j);
                    double sq = 0.0;
                    g = dps_grad_with_score(model, op->for_slice(j), x, s, yj,
                                            t, gcfg, &sq);
                    rsq[js] = sq;
                }

                if (i >= 1) {
                    Slice2D z(x.h, x.w);
                    rng_gaussian_fill(z.data, cfg.seed, RngDomain::Predictor,
                                      static_cast<std::uint64_t>(i), slice_key);
                    predictor_step(x.data, i, s.data, z.data, sched);
                }

                for (int c = 0; c < cfg.corrector_steps; ++c) {
                    const Slice2D sc = model.eval(x, t_corr);
                    Slice2D z(x.h, x.w);
                    rng_gaussian_fill(
                        z.data, cfg.seed, RngDomain::Corrector,
                        (static_cast<std::uint64_t>(i) << 8) |
                            static_cast<std::uint64_t>(c),
                        slice_key);
                    corrector_step(x.data, sc.data, z.data, cfg.corrector_snr);
                }

                if (guided)
                    x = dps_update(x, g, cfg.lambda);
                slice_insert(X, axis, j, x);
            }
        });

    double total = 0.0;
    for (const double v : rsq) // fixed order: deterministic reduction
        total += v;
    return total;
}

void check_finite(const Volume3D& X, int step) {
    for (const double v : X.data)
        if (!std::isfinite(v))
            throw divergence_error("non-finite values in sample volume", step);
}

void require_measurements(const MeasurementStack& Y, const OperatorHandle& op,
                          std::array<int, 3> shape) {
    if (op.empty())
        throw dim_error("sampler: empty operator handle");
    if (Y.n != shape[2])
        throw dim_error("sampler: measurement stack has " +
                        std::to_string(Y.n) + " planes, volume has " +
                        std::to_string(shape[2]) + " primary slices");
    const std::size_t n_ops = op.per_slice.size();
    if (n_ops != 1 && n_ops != static_cast<std::size_t>(shape[2]))
        throw dim_error("sampler: operator handle must hold 1 or " +
                        std::to_string(shape[2]) + " operators, got " +
                        std::to_string(n_ops));
    for (const auto& o : op.per_slice) {
        const auto in = o->in_shape();
        const auto out = o->out_shape();
        if (in[0] != shape[0] || in[1] != shape[1])
            throw dim_error("sampler: operator input shape (" +
                            std::to_string(in[0]) + "," +
                            std::to_string(in[1]) +
                            ") does not match primary slices (" +
                            std::to_string(shape[0]) + "," +
                            std::to_string(shape[1]) + ")");
        if (out[0] != Y.h || out[1] != Y.w ||
            o->complex_output() != Y.complex_valued)
            throw dim_error(
                "sampler: operator output does not match measurement planes");
    }
}

std::string mode_name(GuidanceMode mode) {
    return mode == GuidanceMode::ExactVJP ? "exact_vjp" : "identity";
}

RunResult run_sampler(const MeasurementStack* Y, const OperatorHandle* op,
                      const ScoreModel& model_p, const ScoreModel& model_a,
                      std::array<int, 3> shape, const SamplerConfig& cfg,
                      const char* kind) {
    validate_config(cfg);
    if (shape[0] <= 0 || shape[1] <= 0 || shape[2] <= 0)
        throw dim_error("sampler: volume extents must be positive");
    const NoiseSchedule sched = sampler_schedule(model_p, model_a, cfg);
    const bool conditional = Y != nullptr;
    if (conditional)
        require_measurements(*Y, *op, shape);

    RunResult res;
    res.plan = make_step_plan(cfg.N, cfg.K, cfg.seed);

    Volume3D X(shape[0], shape[1], shape[2]);
    ThreadPool::global().parallel_for(
        X.size(), [&](std::size_t begin, std::size_t end) {
            rng_gaussian_fill(
                std::span<double>(X.data).subspan(begin, end - begin),
                cfg.seed, RngDomain::Init, 0, 0, begin);
            for (std::size_t v = begin; v < end; ++v)
                X.data[v] *= sched.sigma_max;
        });

    const bool guided = conditional && cfg.lambda != 0.0;
    int iter = 0;
    for (int i = cfg.N - 1; i >= 0; --i, ++iter) {
        if (res.plan.branch[static_cast<std::size_t>(i)] == Branch::Primary) {
            const double rtotal =
                sweep(X, i, model_p, SliceAxis::Axis3,
                      conditional ? op : nullptr, conditional ? Y : nullptr,
                      cfg, sched);
            if (guided)
                res.residual_trace.push_back(rtotal);
        } else {
            sweep(X, i, model_a, SliceAxis::Axis1, nullptr, nullptr, cfg,
                  sched);
        }
        if (iter % cfg.check_every == cfg.check_every - 1)
            check_finite(X, i);
    }
    check_finite(X, 0);

    nlohmann::json man;
    man["kind"] = kind;
    nlohmann::json jcfg;
    jcfg["N"] = cfg.N;
    if (std::isinf(cfg.K))
        jcfg["K"] = "inf";
    else
        jcfg["K"] = cfg.K;
    jcfg["lambda"] = cfg.lambda;
    jcfg["corrector_steps"] = cfg.corrector_steps;
    jcfg["corrector_snr"] = cfg.corrector_snr;
    jcfg["seed"] = cfg.seed;
    jcfg["guidance_mode"] = mode_name(cfg.guidance_mode);
    jcfg["normalize_residual"] = cfg.normalize_residual;
    jcfg["sigma_min"] = sched.sigma_min;
    jcfg["sigma_max"] = sched.sigma_max;
    man["config"] = jcfg;
    man["shape"] = shape;
    man["plan"] = {{"primary_steps", res.plan.primary_count()},
                   {"auxiliary_steps", res.plan.auxiliary_count()},
                   {"branches", res.plan.to_string()}};
    man["conditional"] = guided;
    man["residual_trace"] = res.residual_trace;
    res.manifest = std::move(man);
    res.X = std::move(X);
    return res;
}

} // namespace

void primary_conditional_sweep(Volume3D& X, int i, const ScoreModel& model_p,
                               const OperatorHandle& op,
                               const MeasurementStack& Y,
                               const SamplerConfig& cfg) {
    validate_config(cfg);
    const NoiseSchedule sched(model_p.schedule().sigma_min,
                              model_p.schedule().sigma_max, cfg.N);
    require_measurements(Y, op, X.shape());
    sweep(X, i, model_p, SliceAxis::Axis3, &op, &Y, cfg, sched);
}

void primary_sweep(Volume3D& X, int i, const ScoreModel& model_p,
                   const SamplerConfig& cfg) {
    validate_config(cfg);
    const NoiseSchedule sched(model_p.schedule().sigma_min,
                              model_p.schedule().sigma_max, cfg.N);
    sweep(X, i, model_p, SliceAxis::Axis3, nullptr, nullptr, cfg, sched);
}

void auxiliary_sweep(Volume3D& X, int i, const ScoreModel& model_a,
                     const SamplerConfig& cfg) {
    validate_config(cfg);
    const NoiseSchedule sched(model_a.schedule().sigma_min,
                              model_a.schedule().sigma_max, cfg.N);
    sweep(X, i, model_a, SliceAxis::Axis1, nullptr, nullptr, cfg, sched);
}

RunResult solve_inverse(const MeasurementStack& Y, const OperatorHandle& op,
                        const ScoreModel& model_p, const ScoreModel& model_a,
                        std::array<int, 3> shape, const SamplerConfig& cfg) {
    return run_sampler(&Y, &op, model_p, model_a, shape, cfg, "solve_inverse");
}

RunResult generate(const ScoreModel& model_p, const ScoreModel& model_a,
                   std::array<int, 3> shape, const SamplerConfig& cfg) {
    return run_sampler(nullptr, nullptr, model_p, model_a, shape, cfg,
                       "generate");
}

} // namespace tpdm
