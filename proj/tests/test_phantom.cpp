// Phantom and measurement-simulation tests: determinism and range of the
// generated volumes, and the "residual at ground truth is zero" contract
// for every task's operator/measurement pairing.

#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <vector>

#include "tpdm/errors.hpp"
#include "tpdm/metrics.hpp"
#include "tpdm/operators.hpp"
#include "tpdm/phantom.hpp"
#include "tpdm/rng.hpp"
#include "tpdm/volume.hpp"

using namespace tpdm;

namespace {

// Max |A(slice_j) - Y_j| over all slices and measurement components.
double ground_truth_residual(const Volume3D& vol,
                             const SimulatedMeasurement& sim) {
    double worst = 0.0;
    for (int j = 0; j < vol.d3; ++j) {
        const Slice2D x = slice_extract(vol, SliceAxis::Axis3, j);
        const Measurement2D ax = sim.op.for_slice(j).apply(x);
        const Measurement2D y = stack_plane(sim.Y, j);
        for (std::size_t i = 0; i < ax.re.size(); ++i)
            worst = std::max(worst, std::abs(ax.re[i] - y.re[i]));
        for (std::size_t i = 0; i < ax.im.size(); ++i)
            worst = std::max(worst, std::abs(ax.im[i] - y.im[i]));
    }
    return worst;
}

} // namespace

TEST_CASE("make_phantom") {
    SUBCASE("n_ellipsoids = 0 gives the zero volume") {
        PhantomSpec spec;
        spec.d1 = spec.d2 = spec.d3 = 8;
        spec.n_ellipsoids = 0;
        const Volume3D v = make_phantom(spec);
        for (double x : v.data)
            CHECK(x == 0.0);
    }
    SUBCASE("deterministic given the seed") {
        PhantomSpec spec;
        spec.d1 = spec.d2 = spec.d3 = 16;
        spec.seed = 42;
        const Volume3D a = make_phantom(spec);
        const Volume3D b = make_phantom(spec);
        CHECK(a.data == b.data);
        spec.seed = 43;
        const Volume3D c = make_phantom(spec);
        CHECK(a.data != c.data);
    }
    SUBCASE("values stay in [0, 1] across 100 random specs") {
        for (int k = 0; k < 100; ++k) {
            PhantomSpec spec;
            spec.d1 = 8 + static_cast<int>(
                              rng_uniform(808, RngDomain::Test, k, 0, 0) * 8);
            spec.d2 = 8 + static_cast<int>(
                              rng_uniform(808, RngDomain::Test, k, 1, 0) * 8);
            spec.d3 = 8 + static_cast<int>(
                              rng_uniform(808, RngDomain::Test, k, 2, 0) * 8);
            spec.n_ellipsoids = 1 + k % 8;
            spec.seed = static_cast<std::uint64_t>(1000 + k);
            const Volume3D v = make_phantom(spec);
            double lo = 1e300, hi = -1e300;
            for (double x : v.data) {
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
            CHECK(lo >= 0.0);
            CHECK(hi <= 1.0);
        }
    }
    SUBCASE("a typical phantom has interior structure") {
        PhantomSpec spec;
        spec.d1 = spec.d2 = spec.d3 = 24;
        spec.seed = 7;
        const Volume3D v = make_phantom(spec);
        double mean = 0.0;
        for (double x : v.data)
            mean += x;
        mean /= static_cast<double>(v.data.size());
        CHECK(mean > 0.01); // not empty
        CHECK(mean < 0.99); // not saturated
        double var = 0.0;
        for (double x : v.data)
            var += (x - mean) * (x - mean);
        CHECK(var / static_cast<double>(v.data.size()) > 1e-4);
    }
}

TEST_CASE("simulate_measurement: zsr") {
    PhantomSpec spec;
    spec.d1 = 20;
    spec.d2 = 16;
    spec.d3 = 12;
    spec.seed = 3;
    const Volume3D vol = make_phantom(spec);

    SUBCASE("M=1: Y equals the volume's slices, operator acts as identity") {
        TaskSpec task;
        task.kind = TaskKind::Zsr;
        task.merge_size = 1;
        const SimulatedMeasurement sim = simulate_measurement(vol, task);
        CHECK(sim.Y.h == 20);
        CHECK(sim.Y.w == 16);
        CHECK(sim.Y.n == 12);
        for (int j = 0; j < 12; ++j) {
            const Slice2D s = slice_extract(vol, SliceAxis::Axis3, j);
            const Measurement2D y = stack_plane(sim.Y, j);
            for (std::size_t i = 0; i < s.data.size(); ++i)
                CHECK(y.re[i] == doctest::Approx(s.data[i]).epsilon(1e-14));
        }
        CHECK(ground_truth_residual(vol, sim) <= 1e-12);
    }
    SUBCASE("M=5: measurement extent along the merge axis is d1/5") {
        TaskSpec task;
        task.kind = TaskKind::Zsr;
        task.merge_size = 5;
        const SimulatedMeasurement sim = simulate_measurement(vol, task);
        CHECK(sim.Y.h == 4); // 20 / 5
        CHECK(sim.Y.w == 16);
        CHECK(sim.Y.n == 12);
        CHECK(sim.degraded.h == 4);

        // Y = sqrt(M) * degraded (RootM guidance vs Mean degradation).
        for (std::size_t i = 0; i < sim.Y.re.size(); ++i)
            CHECK(sim.Y.re[i] ==
                  doctest::Approx(std::sqrt(5.0) * sim.degraded.re[i])
                      .epsilon(1e-12));

        // Degraded planes are the plain row-averages of the slices.
        const Slice2D s0 = slice_extract(vol, SliceAxis::Axis3, 0);
        const Measurement2D d0 = stack_plane(sim.degraded, 0);
        for (int c = 0; c < 16; ++c) {
            double acc = 0.0;
            for (int r = 0; r < 5; ++r)
                acc += s0.at(r, c);
            CHECK(d0.re[static_cast<std::size_t>(c)] ==
                  doctest::Approx(acc / 5.0).epsilon(1e-12));
        }

        CHECK(ground_truth_residual(vol, sim) <= 1e-12);
    }
    SUBCASE("non-divisible merge size is rejected") {
        TaskSpec task;
        task.kind = TaskKind::Zsr;
        task.merge_size = 3; // 20 % 3 != 0
        CHECK_THROWS_AS(simulate_measurement(vol, task), dim_error);
    }
}

TEST_CASE("simulate_measurement: csmri") {
    PhantomSpec spec;
    spec.d1 = 64;
    spec.d2 = 64;
    spec.d3 = 6;
    spec.seed = 4;
    const Volume3D vol = make_phantom(spec);

    SUBCASE("shared mask: complex stack, zero residual at ground truth") {
        TaskSpec task;
        task.kind = TaskKind::Csmri;
        task.R = 8.0;
        task.mask_seed = 11;
        const SimulatedMeasurement sim = simulate_measurement(vol, task);
        CHECK(sim.Y.complex_valued);
        CHECK(sim.Y.n == 6);
        REQUIRE(sim.masks.size() == 1);
        CHECK(sim.op.per_slice.size() == 1);
        CHECK(ground_truth_residual(vol, sim) == 0.0);

        // Unsampled bins are identically zero in the measurements.
        const Measurement2D y0 = stack_plane(sim.Y, 0);
        for (int r = 0; r < 64; ++r)
            for (int c = 0; c < 64; ++c)
                if (!sim.masks[0].at(r, c)) {
                    const std::size_t i =
                        static_cast<std::size_t>(r) * 64 + c;
                    CHECK(y0.re[i] == 0.0);
                    CHECK(y0.im[i] == 0.0);
                }
    }
    SUBCASE("kept fraction tracks 1/R within +/-20% (R = 48)") {
        TaskSpec task;
        task.kind = TaskKind::Csmri;
        task.R = 48.0;
        task.mask_seed = 21;
        const SimulatedMeasurement sim = simulate_measurement(vol, task);
        const double frac = static_cast<double>(sim.masks[0].kept_count()) /
                            (64.0 * 64.0);
        CHECK(frac >= 0.8 / 48.0);
        CHECK(frac <= 1.2 / 48.0);
    }
    SUBCASE("per-slice masks: one mask per slice, masks differ") {
        TaskSpec task;
        task.kind = TaskKind::Csmri;
        task.R = 8.0;
        task.mask_seed = 31;
        task.per_slice_mask = true;
        const SimulatedMeasurement sim = simulate_measurement(vol, task);
        REQUIRE(sim.masks.size() == 6);
        CHECK(sim.op.per_slice.size() == 6);
        CHECK(sim.masks[0].keep != sim.masks[1].keep);
        CHECK(ground_truth_residual(vol, sim) == 0.0);
    }
}

TEST_CASE("simulate_measurement: svct") {
    PhantomSpec spec;
    spec.d1 = 32;
    spec.d2 = 32;
    spec.d3 = 5;
    spec.seed = 5;
    const Volume3D vol = make_phantom(spec);

    SUBCASE("per-slice sinograms with zero residual at ground truth") {
        TaskSpec task;
        task.kind = TaskKind::Svct;
        task.n_angles = 12;
        const SimulatedMeasurement sim = simulate_measurement(vol, task);
        CHECK(sim.Y.h == 12);
        CHECK(sim.Y.w == 32);
        CHECK(sim.Y.n == 5);
        CHECK_FALSE(sim.Y.complex_valued);
        CHECK(ground_truth_residual(vol, sim) == 0.0);
    }
    SUBCASE("non-square slices are rejected") {
        PhantomSpec rect = spec;
        rect.d2 = 16;
        const Volume3D bad = make_phantom(rect);
        TaskSpec task;
        task.kind = TaskKind::Svct;
        CHECK_THROWS_AS(simulate_measurement(bad, task), dim_error);
    }
}

TEST_CASE("measurement noise") {
    PhantomSpec spec;
    spec.d1 = 16;
    spec.d2 = 16;
    spec.d3 = 4;
    spec.seed = 6;
    const Volume3D vol = make_phantom(spec);

    TaskSpec clean;
    clean.kind = TaskKind::Csmri;
    clean.R = 4.0;
    clean.mask_seed = 9;
    TaskSpec noisy = clean;
    noisy.noise_sigma = 0.05;

    const SimulatedMeasurement a = simulate_measurement(vol, clean);
    const SimulatedMeasurement b = simulate_measurement(vol, noisy);
    const SimulatedMeasurement b2 = simulate_measurement(vol, noisy);

    SUBCASE("noise is deterministic and kept-bin-only") {
        CHECK(b.Y.re == b2.Y.re);
        CHECK(b.Y.im == b2.Y.im);
        CHECK(a.Y.re != b.Y.re);
        for (int r = 0; r < 16; ++r)
            for (int c = 0; c < 16; ++c)
                if (!a.masks[0].at(r, c))
                    CHECK(b.Y.re[static_cast<std::size_t>(r) * 16 + c] == 0.0);
    }
    SUBCASE("noise magnitude is on the configured scale") {
        double acc = 0.0;
        std::int64_t n = 0;
        for (std::size_t i = 0; i < a.Y.re.size(); ++i) {
            const double d = b.Y.re[i] - a.Y.re[i];
            if (d != 0.0) {
                acc += d * d;
                ++n;
            }
        }
        REQUIRE(n > 50);
        const double std_hat = std::sqrt(acc / static_cast<double>(n));
        CHECK(std_hat == doctest::Approx(0.05).epsilon(0.3));
    }
    SUBCASE("zsr noise lands on the degraded stack before rescaling") {
        TaskSpec z;
        z.kind = TaskKind::Zsr;
        z.merge_size = 4;
        z.noise_sigma = 0.05;
        const SimulatedMeasurement sim = simulate_measurement(vol, z);
        for (std::size_t i = 0; i < sim.Y.re.size(); ++i)
            CHECK(sim.Y.re[i] ==
                  doctest::Approx(2.0 * sim.degraded.re[i]).epsilon(1e-12));
    }
}

TEST_CASE("build_operator reconstructs the simulation's operators") {
    PhantomSpec spec;
    spec.d1 = 32;
    spec.d2 = 32;
    spec.d3 = 4;
    spec.seed = 8;
    const Volume3D vol = make_phantom(spec);
    const std::array<int, 3> shape{32, 32, 4};

    auto check_pairing = [&](const TaskSpec& task) {
        const SimulatedMeasurement sim = simulate_measurement(vol, task);
        const OperatorHandle op = build_operator(task, shape);
        REQUIRE(op.per_slice.size() == sim.op.per_slice.size());
        for (int j = 0; j < vol.d3; ++j) {
            const Slice2D x = slice_extract(vol, SliceAxis::Axis3, j);
            const Measurement2D a = sim.op.for_slice(j).apply(x);
            const Measurement2D b = op.for_slice(j).apply(x);
            CHECK(a.re == b.re);
            CHECK(a.im == b.im);
        }
    };

    TaskSpec zsr;
    zsr.kind = TaskKind::Zsr;
    zsr.merge_size = 4;
    check_pairing(zsr);

    TaskSpec csmri;
    csmri.kind = TaskKind::Csmri;
    csmri.R = 6.0;
    csmri.mask_seed = 77;
    check_pairing(csmri);

    TaskSpec per_slice = csmri;
    per_slice.per_slice_mask = true;
    check_pairing(per_slice);

    TaskSpec svct;
    svct.kind = TaskKind::Svct;
    svct.n_angles = 8;
    check_pairing(svct);
}

TEST_CASE("task manifests name the task and its parameters") {
    TaskSpec csmri;
    csmri.kind = TaskKind::Csmri;
    csmri.R = 8.0;
    csmri.mask_seed = 5;
    const nlohmann::json j = task_to_json(csmri);
    CHECK(j["kind"] == "csmri");
    CHECK(j["R"] == 8.0);
    CHECK(j["mask_seed"] == 5);

    TaskSpec zsr;
    zsr.kind = TaskKind::Zsr;
    zsr.merge_size = 5;
    CHECK(task_to_json(zsr)["kind"] == "zsr");
    CHECK(task_to_json(zsr)["merge_size"] == 5);

    TaskSpec svct;
    svct.kind = TaskKind::Svct;
    svct.n_angles = 12;
    CHECK(task_to_json(svct)["kind"] == "svct");
    CHECK(task_to_json(svct)["n_angles"] == 12);
}
