#include "tpdm/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tpdm/errors.hpp"
#include "tpdm/rng.hpp"
#include "tpdm/thread_pool.hpp"

namespace tpdm {

namespace {

struct Ellipsoid {
    double c[3];   // center, voxel units
    double ax[3];  // semi-axes, voxel units
    double R[3][3];
    double intensity;
};

Ellipsoid draw_ellipsoid(const PhantomSpec& spec, int e) {
    const auto u = [&](std::uint64_t k) {
        return rng_uniform(spec.seed, RngDomain::Phantom,
                           static_cast<std::uint64_t>(e), 0, k);
    };
    Ellipsoid el{};
    const double dims[3] = {static_cast<double>(spec.d1),
                            static_cast<double>(spec.d2),
                            static_cast<double>(spec.d3)};
    for (int a = 0; a < 3; ++a)
        el.c[a] = (0.2 + 0.6 * u(static_cast<std::uint64_t>(a))) * dims[a];
    for (int a = 0; a < 3; ++a)
        el.ax[a] =
            (0.12 + 0.20 * u(static_cast<std::uint64_t>(3 + a))) * dims[a];
    el.intensity = spec.intensity_min +
                   (spec.intensity_max - spec.intensity_min) * u(6);

    // Uniform random rotation from a normalized 4-normal quaternion.
    double q[4];
    for (int k = 0; k < 4; ++k)
        q[k] = rng_gaussian(spec.seed, RngDomain::Phantom,
                            static_cast<std::uint64_t>(e), 1,
                            static_cast<std::uint64_t>(k));
    double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] +
                            q[3] * q[3]);
    if (norm < 1e-12) {
        q[0] = 1.0;
        q[1] = q[2] = q[3] = 0.0;
        norm = 1.0;
    }
    const double w = q[0] / norm, x = q[1] / norm, y = q[2] / norm,
                 z = q[3] / norm;
    const double R[3][3] = {
        {1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
        {2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
        {2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            el.R[r][c] = R[r][c];
    return el;
}

} // namespace

Volume3D make_phantom(const PhantomSpec& spec) {
    if (spec.d1 <= 0 || spec.d2 <= 0 || spec.d3 <= 0)
        throw dim_error("make_phantom: extents must be positive");
    if (spec.n_ellipsoids < 0)
        throw config_error("make_phantom: n_ellipsoids must be >= 0");
    if (!(spec.intensity_min <= spec.intensity_max))
        throw config_error("make_phantom: intensity_min > intensity_max");

    std::vector<Ellipsoid> els;
    els.reserve(static_cast<std::size_t>(spec.n_ellipsoids));
    for (int e = 0; e < spec.n_ellipsoids; ++e)
        els.push_back(draw_ellipsoid(spec, e));

    Volume3D vol(spec.d1, spec.d2, spec.d3);
    const std::size_t total = vol.size();
    ThreadPool::global().parallel_for(total, [&](std::size_t b, std::size_t e_) {
        for (std::size_t idx = b; idx < e_; ++idx) {
            const int a = static_cast<int>(idx / (static_cast<std::size_t>(
                                                      spec.d2) *
                                                  spec.d3));
            const int rem = static_cast<int>(idx % (static_cast<std::size_t>(
                                                        spec.d2) *
                                                    spec.d3));
            const int bcoord = rem / spec.d3;
            const int ccoord = rem % spec.d3;
            const double p[3] = {static_cast<double>(a),
                                 static_cast<double>(bcoord),
                                 static_cast<double>(ccoord)};
            double v = 0.0;
            for (const Ellipsoid& el : els) {
                double rel[3];
                for (int r = 0; r < 3; ++r) {
                    double acc = 0.0;
                    for (int c = 0; c < 3; ++c)
                        acc += el.R[r][c] * (p[c] - el.c[c]);
                    rel[r] = acc / el.ax[r];
                }
                const double rho = std::sqrt(rel[0] * rel[0] + rel[1] * rel[1] +
                                             rel[2] * rel[2]);
                const double amin =
                    std::min({el.ax[0], el.ax[1], el.ax[2]});
                // ~1-voxel cosine ramp across the boundary.
                const double delta =
                    std::clamp((1.0 - rho) * amin, 0.0, 1.0);
                const double ramp =
                    0.5 * (1.0 - std::cos(std::numbers::pi * delta));
                v += el.intensity * ramp;
            }
            vol.data[idx] = std::clamp(v, 0.0, 1.0);
        }
    });
    return vol;
}

namespace {

void add_measurement_noise(MeasurementStack& Y, double sigma,
                           std::uint64_t seed) {
    if (sigma <= 0.0)
        return;
    const std::size_t per_plane = Y.plane_size();
    for (int j = 0; j < Y.n; ++j) {
        const std::size_t off = static_cast<std::size_t>(j) * per_plane;
        for (std::size_t i = 0; i < per_plane; ++i) {
            Y.re[off + i] += sigma * rng_gaussian(seed, RngDomain::MeasNoise,
                                                  static_cast<std::uint64_t>(j),
                                                  0, i);
            if (Y.complex_valued)
                Y.im[off + i] +=
                    sigma * rng_gaussian(seed, RngDomain::MeasNoise,
                                         static_cast<std::uint64_t>(j), 1, i);
        }
    }
}

} // namespace

SimulatedMeasurement simulate_measurement(const Volume3D& vol,
                                          const TaskSpec& task) {
    if (vol.d1 <= 0 || vol.d2 <= 0 || vol.d3 <= 0)
        throw dim_error("simulate_measurement: empty volume");
    SimulatedMeasurement sim;
    nlohmann::json& man = sim.manifest;
    man["shape"] = {vol.d1, vol.d2, vol.d3};
    man["noise_sigma"] = task.noise_sigma;

    switch (task.kind) {
    case TaskKind::Zsr: {
        const int M = task.merge_size;
        if (M < 1)
            throw config_error("zsr: merge_size must be >= 1");
        if (vol.d1 % M != 0)
            throw dim_error("zsr: axis-1 extent " + std::to_string(vol.d1) +
                            " is not a multiple of merge_size " +
                            std::to_string(M) + " (no implicit padding)");
        const int hm = vol.d1 / M;
        sim.degraded = MeasurementStack(hm, vol.d2, vol.d3, false);
        for (int j = 0; j < vol.d3; ++j) {
            const Slice2D x = slice_extract(vol, SliceAxis::Axis3, j);
            set_stack_plane(sim.degraded, j,
                            zmerge_apply(x, M, MergeVariant::Mean,
                                         MergeAxis::Rows));
        }
        add_measurement_noise(sim.degraded, task.noise_sigma, task.mask_seed);
        // Guidance stack: sqrt(M) * mean measurements match the RootM
        // operator, whose A A^T = I scaling conditions DPS well.
        sim.Y = sim.degraded;
        const double root = std::sqrt(static_cast<double>(M));
        for (double& v : sim.Y.re)
            v *= root;
        sim.op.per_slice.push_back(std::make_shared<ZMergeOperator>(
            vol.d1, vol.d2, M, MergeVariant::RootM, MergeAxis::Rows));
        man["task"] = "zsr";
        man["merge_size"] = M;
        break;
    }
    case TaskKind::Csmri: {
        const int n_masks = task.per_slice_mask ? vol.d3 : 1;
        for (int k = 0; k < n_masks; ++k) {
            KSpaceMask mask =
                poisson_mask(vol.d1, vol.d2, task.R, task.center_frac,
                             task.mask_seed + static_cast<std::uint64_t>(k));
            sim.masks.push_back(mask);
            sim.op.per_slice.push_back(
                std::make_shared<KSpaceOperator>(std::move(mask)));
        }
        sim.Y = MeasurementStack(vol.d1, vol.d2, vol.d3, true);
        for (int j = 0; j < vol.d3; ++j) {
            const Slice2D x = slice_extract(vol, SliceAxis::Axis3, j);
            set_stack_plane(sim.Y, j, sim.op.for_slice(j).apply(x));
        }
        add_measurement_noise(sim.Y, task.noise_sigma, task.mask_seed);
        // Noise on an unsampled location is unobservable: re-mask.
        if (task.noise_sigma > 0.0) {
            for (int j = 0; j < vol.d3; ++j) {
                const KSpaceMask& mask =
                    sim.masks[task.per_slice_mask ? static_cast<std::size_t>(j)
                                                  : 0];
                const std::size_t off =
                    static_cast<std::size_t>(j) * sim.Y.plane_size();
                for (std::size_t i = 0; i < sim.Y.plane_size(); ++i)
                    if (!mask.keep[i]) {
                        sim.Y.re[off + i] = 0.0;
                        sim.Y.im[off + i] = 0.0;
                    }
            }
        }
        man["task"] = "csmri";
        man["R"] = task.R;
        man["center_frac"] = task.center_frac;
        man["mask_seed"] = task.mask_seed;
        man["per_slice_mask"] = task.per_slice_mask;
        man["kept_count"] = sim.masks.front().kept_count();
        break;
    }
    case TaskKind::Svct: {
        if (vol.d1 != vol.d2)
            throw dim_error("svct: primary slices must be square, got (" +
                            std::to_string(vol.d1) + "," +
                            std::to_string(vol.d2) + ")");
        if (task.n_angles < 1)
            throw config_error("svct: n_angles must be >= 1");
        auto op = std::make_shared<RadonOperator>(
            RadonGeometry(task.n_angles, vol.d2));
        sim.Y = MeasurementStack(task.n_angles, vol.d2, vol.d3, false);
        for (int j = 0; j < vol.d3; ++j) {
            const Slice2D x = slice_extract(vol, SliceAxis::Axis3, j);
            set_stack_plane(sim.Y, j, op->apply(x));
        }
        sim.op.per_slice.push_back(std::move(op));
        add_measurement_noise(sim.Y, task.noise_sigma, task.mask_seed);
        man["task"] = "svct";
        man["n_angles"] = task.n_angles;
        break;
    }
    }
    man["measurement_shape"] = {sim.Y.h, sim.Y.w, sim.Y.n};
    man["complex"] = sim.Y.complex_valued;
    return sim;
}

OperatorHandle build_operator(const TaskSpec& task, std::array<int, 3> shape) {
    if (shape[0] <= 0 || shape[1] <= 0 || shape[2] <= 0)
        throw dim_error("build_operator: extents must be positive");
    OperatorHandle op;
    switch (task.kind) {
    case TaskKind::Zsr:
        if (task.merge_size < 1)
            throw config_error("zsr: merge_size must be >= 1");
        if (shape[0] % task.merge_size != 0)
            throw dim_error("zsr: axis-1 extent " + std::to_string(shape[0]) +
                            " is not a multiple of merge_size " +
                            std::to_string(task.merge_size) +
                            " (no implicit padding)");
        op.per_slice.push_back(std::make_shared<ZMergeOperator>(
            shape[0], shape[1], task.merge_size, MergeVariant::RootM,
            MergeAxis::Rows));
        break;
    case TaskKind::Csmri: {
        const int n_masks = task.per_slice_mask ? shape[2] : 1;
        for (int k = 0; k < n_masks; ++k)
            op.per_slice.push_back(std::make_shared<KSpaceOperator>(
                poisson_mask(shape[0], shape[1], task.R, task.center_frac,
                             task.mask_seed + static_cast<std::uint64_t>(k))));
        break;
    }
    case TaskKind::Svct:
        if (shape[0] != shape[1])
            throw dim_error("svct: primary slices must be square, got (" +
                            std::to_string(shape[0]) + "," +
                            std::to_string(shape[1]) + ")");
        if (task.n_angles < 1)
            throw config_error("svct: n_angles must be >= 1");
        op.per_slice.push_back(std::make_shared<RadonOperator>(
            RadonGeometry(task.n_angles, shape[1])));
        break;
    }
    return op;
}

nlohmann::json task_to_json(const TaskSpec& task) {
    nlohmann::json j;
    switch (task.kind) {
    case TaskKind::Zsr:
        j["kind"] = "zsr";
        j["merge_size"] = task.merge_size;
        break;
    case TaskKind::Csmri:
        j["kind"] = "csmri";
        j["R"] = task.R;
        j["center_frac"] = task.center_frac;
        j["mask_seed"] = task.mask_seed;
        j["per_slice_mask"] = task.per_slice_mask;
        break;
    case TaskKind::Svct:
        j["kind"] = "svct";
        j["n_angles"] = task.n_angles;
        break;
    }
    j["noise_sigma"] = task.noise_sigma;
    return j;
}

} // namespace tpdm
