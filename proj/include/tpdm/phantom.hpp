#pragma once

// Synthetic ellipsoid phantoms and retrospective measurement simulation
// for the three inverse-problem tasks (Z-axis super-resolution, CS-MRI
// k-space subsampling, sparse-view CT).

#include <cstdint>
#include <memory>
#include <vector>

#include "json.hpp"

#include "tpdm/operators.hpp"
#include "tpdm/volume.hpp"

namespace tpdm {

struct PhantomSpec {
    int d1 = 32, d2 = 32, d3 = 32;
    int n_ellipsoids = 6;
    double intensity_min = 0.2;
    double intensity_max = 1.0;
    std::uint64_t seed = 0;
};

// Sum of rotated ellipsoids with a ~1-voxel cosine edge ramp, clipped to
// [0, 1]; background 0.  Deterministic given the seed.
Volume3D make_phantom(const PhantomSpec& spec);

enum class TaskKind { Zsr, Csmri, Svct };

struct TaskSpec {
    TaskKind kind = TaskKind::Csmri;
    // zsr
    int merge_size = 5;
    // csmri
    double R = 8.0;
    double center_frac = 1.0 / 16.0;
    std::uint64_t mask_seed = 0;
    bool per_slice_mask = false;
    // svct
    int n_angles = 12;
    // all tasks: optional additive Gaussian noise on the measurements
    double noise_sigma = 0.0;
};

struct SimulatedMeasurement {
    MeasurementStack Y;        // guidance-ready measurement stack
    OperatorHandle op;         // operator(s) consistent with Y
    // zsr only: the physical Mean-merged (thick-slice) measurements; the
    // guidance stack above is sqrt(M) times this, matching the RootM
    // operator so A(x_true) = Y holds exactly in the noiseless case.
    MeasurementStack degraded;
    std::vector<KSpaceMask> masks; // csmri only
    nlohmann::json manifest;
};

// Retrospective simulation over the volume's Axis3 (primary) slices:
//  - zsr: Mean merge of M consecutive rows per slice (the degradation),
//    returned with the RootM operator and sqrt(M)-scaled measurements;
//  - csmri: Poisson-mask k-space sampling, one shared mask by default;
//  - svct: per-slice sinograms over n_angles views.
// noise_sigma > 0 adds N(0, noise_sigma^2) to every measurement
// component (real and imaginary separately for k-space).
SimulatedMeasurement simulate_measurement(const Volume3D& vol,
                                          const TaskSpec& task);

// The guidance operator(s) for a task on volumes of the given shape;
// reconstructs exactly what simulate_measurement paired with its
// measurements (same mask seeds).
OperatorHandle build_operator(const TaskSpec& task, std::array<int, 3> shape);

// Task echo for run manifests.
nlohmann::json task_to_json(const TaskSpec& task);

} // namespace tpdm
