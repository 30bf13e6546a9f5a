// Metric tests: PSNR against a direct MSE recomputation, SSIM against an
// independently recomputed Gaussian-window oracle, direction means against
// per-slice brute force, and the report serialization (including the
// "inf" sentinel).

#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "tpdm/errors.hpp"
#include "tpdm/metrics.hpp"
#include "tpdm/rng.hpp"
#include "tpdm/volume.hpp"

using namespace tpdm;

namespace {

Volume3D random_volume(int d1, int d2, int d3, std::uint64_t key,
                       double lo = 0.0, double hi = 1.0) {
    Volume3D v(d1, d2, d3);
    for (std::size_t i = 0; i < v.data.size(); ++i) {
        const double u = rng_uniform(616, RngDomain::Test, key,
                                     static_cast<std::uint64_t>(i), 0);
        v.data[i] = lo + (hi - lo) * u;
    }
    return v;
}

// Independent SSIM recomputation: same definition, separate code path.
double ssim_oracle(const Slice2D& a, const Slice2D& b, double range) {
    const int win = 11;
    const double sig = 1.5;
    std::vector<double> w(win * win);
    double wsum = 0.0;
    for (int y = 0; y < win; ++y)
        for (int x = 0; x < win; ++x) {
            const double dy = y - win / 2, dx = x - win / 2;
            w[y * win + x] = std::exp(-(dy * dy + dx * dx) / (2 * sig * sig));
            wsum += w[y * win + x];
        }
    for (double& v : w)
        v /= wsum;
    const double c1 = 0.01 * range * 0.01 * range;
    const double c2 = 0.03 * range * 0.03 * range;
    auto clip = [&](double v) { return std::min(std::max(v, 0.0), range); };

    double total = 0.0;
    int count = 0;
    for (int y0 = 0; y0 + win <= a.h; ++y0)
        for (int x0 = 0; x0 + win <= a.w; ++x0) {
            double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
            for (int y = 0; y < win; ++y)
                for (int x = 0; x < win; ++x) {
                    const double wv = w[y * win + x];
                    const double va = clip(a.at(y0 + y, x0 + x));
                    const double vb = clip(b.at(y0 + y, x0 + x));
                    ma += wv * va;
                    mb += wv * vb;
                    saa += wv * va * va;
                    sbb += wv * vb * vb;
                    sab += wv * va * vb;
                }
            total += ((2 * ma * mb + c1) * (2 * (sab - ma * mb) + c2)) /
                     ((ma * ma + mb * mb + c1) *
                      ((saa - ma * ma) + (sbb - mb * mb) + c2));
            ++count;
        }
    return total / count;
}

Slice2D random_slice(int h, int w, std::uint64_t key) {
    Slice2D s(h, w);
    for (std::size_t i = 0; i < s.data.size(); ++i)
        s.data[i] = rng_uniform(626, RngDomain::Test, key,
                                static_cast<std::uint64_t>(i), 0);
    return s;
}

} // namespace

TEST_CASE("psnr3d") {
    SUBCASE("identical volumes give the +infinity sentinel") {
        const Volume3D v = random_volume(5, 6, 7, 1);
        CHECK(std::isinf(psnr3d(v, v)));
    }
    SUBCASE("ref=0.1, x=0, range 1 -> exactly 20 dB") {
        const Volume3D x(4, 4, 4, 0.0);
        const Volume3D ref(4, 4, 4, 0.1);
        CHECK(psnr3d(x, ref) == doctest::Approx(20.0).epsilon(1e-12));
    }
    SUBCASE("symmetric in its arguments") {
        const Volume3D a = random_volume(6, 5, 4, 2);
        const Volume3D b = random_volume(6, 5, 4, 3);
        CHECK(psnr3d(a, b) == psnr3d(b, a));
    }
    SUBCASE("matches a direct MSE recomputation to 1e-10 dB") {
        for (std::uint64_t k = 0; k < 5; ++k) {
            const Volume3D a = random_volume(7, 6, 5, 10 + k);
            const Volume3D b = random_volume(7, 6, 5, 20 + k);
            double mse = 0.0;
            for (std::size_t i = 0; i < a.data.size(); ++i) {
                const double d = a.data[i] - b.data[i];
                mse += d * d;
            }
            mse /= static_cast<double>(a.data.size());
            const double expect = -10.0 * std::log10(mse);
            CHECK(std::abs(psnr3d(a, b) - expect) <= 1e-10);
        }
    }
    SUBCASE("values are clipped to [0, data_range] first") {
        Volume3D over(3, 3, 3, 1.5);  // clips to 1.0
        const Volume3D ones(3, 3, 3, 1.0);
        CHECK(std::isinf(psnr3d(over, ones)));
        Volume3D under(3, 3, 3, -0.5); // clips to 0.0
        const Volume3D zeros(3, 3, 3, 0.0);
        CHECK(std::isinf(psnr3d(under, zeros)));
    }
    SUBCASE("non-unit data_range shifts by 20 log10(range)") {
        const Volume3D x(4, 4, 4, 0.0);
        const Volume3D ref(4, 4, 4, 0.1);
        CHECK(psnr3d(x, ref, 2.0) ==
              doctest::Approx(20.0 * std::log10(2.0) + 20.0).epsilon(1e-12));
    }
    SUBCASE("errors") {
        const Volume3D a(4, 4, 4);
        CHECK_THROWS_AS(psnr3d(a, Volume3D(4, 4, 5)), dim_error);
        CHECK_THROWS_AS(psnr3d(a, a, 0.0), config_error);
    }
}

TEST_CASE("ssim2d") {
    SUBCASE("identical slices -> 1") {
        const Slice2D a = random_slice(13, 15, 4);
        CHECK(ssim2d(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("symmetric in its arguments") {
        // Mathematically exact; compiled FMA contraction leaves a few
        // ulps of asymmetry in the fused numerator/denominator sums.
        const Slice2D a = random_slice(12, 12, 5);
        const Slice2D b = random_slice(12, 12, 6);
        CHECK(ssim2d(a, b) == doctest::Approx(ssim2d(b, a)).epsilon(1e-13));
    }
    SUBCASE("constant 0 vs constant 1 -> C1/(1+C1)") {
        const Slice2D zeros(11, 11, 0.0);
        const Slice2D ones(11, 11, 1.0);
        const double c1 = 1e-4;
        CHECK(ssim2d(zeros, ones) ==
              doctest::Approx(c1 / (1.0 + c1)).epsilon(1e-12));
    }
    SUBCASE("matches the independent window oracle to 1e-10") {
        for (std::uint64_t k = 0; k < 4; ++k) {
            const int h = 11 + static_cast<int>(k);
            const int w = 11 + 2 * static_cast<int>(k);
            const Slice2D a = random_slice(h, w, 30 + k);
            const Slice2D b = random_slice(h, w, 40 + k);
            CHECK(std::abs(ssim2d(a, b) - ssim_oracle(a, b, 1.0)) <= 1e-10);
        }
    }
    SUBCASE("stays within [-1, 1] on random pairs") {
        for (std::uint64_t k = 0; k < 10; ++k) {
            const Slice2D a = random_slice(14, 14, 50 + k);
            const Slice2D b = random_slice(14, 14, 60 + k);
            const double s = ssim2d(a, b);
            CHECK(s >= -1.0);
            CHECK(s <= 1.0);
        }
    }
    SUBCASE("slices below the 11x11 window are rejected") {
        CHECK_THROWS_AS(ssim2d(Slice2D(10, 11), Slice2D(10, 11)), dim_error);
        CHECK_THROWS_AS(ssim2d(Slice2D(11, 10), Slice2D(11, 10)), dim_error);
        CHECK_THROWS_AS(ssim2d(Slice2D(12, 12), Slice2D(12, 13)), dim_error);
    }
}

TEST_CASE("ssim_direction_mean") {
    SUBCASE("identical volumes -> 1 along every axis") {
        const Volume3D v = random_volume(12, 13, 14, 7);
        for (int axis : {1, 2, 3})
            CHECK(ssim_direction_mean(v, v, axis) ==
                  doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("two-slice volume: mean of the two per-slice SSIMs (axis 3)") {
        const Volume3D x = random_volume(11, 11, 2, 8);
        const Volume3D ref = random_volume(11, 11, 2, 9);
        const double s0 = ssim2d(slice_extract(x, SliceAxis::Axis3, 0),
                                 slice_extract(ref, SliceAxis::Axis3, 0));
        const double s1 = ssim2d(slice_extract(x, SliceAxis::Axis3, 1),
                                 slice_extract(ref, SliceAxis::Axis3, 1));
        CHECK(ssim_direction_mean(x, ref, 3) ==
              doctest::Approx(0.5 * (s0 + s1)).epsilon(1e-14));
    }
    SUBCASE("per-slice brute-force oracle, all three axes") {
        const Volume3D x = random_volume(12, 13, 14, 10);
        const Volume3D ref = random_volume(12, 13, 14, 11);
        auto plane = [](const Volume3D& v, int axis, int j) {
            if (axis == 1) {
                Slice2D s(v.d2, v.d3);
                for (int b = 0; b < v.d2; ++b)
                    for (int c = 0; c < v.d3; ++c)
                        s.at(b, c) = v.at(j, b, c);
                return s;
            }
            if (axis == 2) {
                Slice2D s(v.d1, v.d3);
                for (int a = 0; a < v.d1; ++a)
                    for (int c = 0; c < v.d3; ++c)
                        s.at(a, c) = v.at(a, j, c);
                return s;
            }
            Slice2D s(v.d1, v.d2);
            for (int a = 0; a < v.d1; ++a)
                for (int b = 0; b < v.d2; ++b)
                    s.at(a, b) = v.at(a, b, j);
            return s;
        };
        for (int axis : {1, 2, 3}) {
            const int count = axis == 1 ? x.d1 : axis == 2 ? x.d2 : x.d3;
            double total = 0.0;
            for (int j = 0; j < count; ++j)
                total += ssim_oracle(plane(x, axis, j), plane(ref, axis, j),
                                     1.0);
            CHECK(ssim_direction_mean(x, ref, axis) ==
                  doctest::Approx(total / count).epsilon(1e-10));
        }
    }
    SUBCASE("anisotropic degradation separates the direction means") {
        // Noise confined to one Axis1 slice: the three direction means
        // must disagree (one ruined slice vs. one ruined row everywhere).
        const int d = 16;
        Volume3D ref(d, d, d);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                for (int c = 0; c < d; ++c)
                    ref.at(a, b, c) =
                        0.5 + 0.25 * std::sin(0.4 * a + 0.3 * b + 0.2 * c);
        Volume3D x = ref;
        for (int b = 0; b < d; ++b)
            for (int c = 0; c < d; ++c)
                x.at(5, b, c) += 0.4 * rng_gaussian(
                                            636, RngDomain::Test,
                                            static_cast<std::uint64_t>(b),
                                            static_cast<std::uint64_t>(c), 0);
        const double s1 = ssim_direction_mean(x, ref, 1);
        const double s2 = ssim_direction_mean(x, ref, 2);
        const double s3 = ssim_direction_mean(x, ref, 3);
        CHECK(s1 != s2);
        CHECK(s1 != s3);
        CHECK(s2 != s3);
        CHECK(s1 < 1.0);
    }
    SUBCASE("errors") {
        const Volume3D a(12, 12, 12);
        CHECK_THROWS_AS(ssim_direction_mean(a, Volume3D(12, 12, 11), 3),
                        dim_error);
        CHECK_THROWS_AS(ssim_direction_mean(a, a, 0), config_error);
        CHECK_THROWS_AS(ssim_direction_mean(a, a, 4), config_error);
    }
}

TEST_CASE("MetricReport serialization") {
    SUBCASE("identical volumes: inf sentinel in JSON and CSV") {
        const Volume3D v = random_volume(12, 12, 12, 12);
        const MetricReport r = evaluate_metrics(v, v);
        CHECK(std::isinf(r.psnr_3d));
        CHECK(r.ssim_axis1 == doctest::Approx(1.0).epsilon(1e-12));

        const auto j = nlohmann::json::parse(r.to_json("runA"));
        CHECK(j["run_id"] == "runA");
        CHECK(j["psnr_3d"] == "inf");
        CHECK(j["ssim_axis2"].get<double>() ==
              doctest::Approx(1.0).epsilon(1e-12));

        const std::string row = r.to_csv_row("runA");
        CHECK(row.rfind("runA,inf,", 0) == 0);
    }
    SUBCASE("finite values round-trip through the CSV row") {
        const Volume3D x = random_volume(12, 12, 12, 13);
        const Volume3D ref = random_volume(12, 12, 12, 14);
        const MetricReport r = evaluate_metrics(x, ref);

        CHECK(MetricReport::csv_header() ==
              "run_id,psnr_3d,ssim_axis1,ssim_axis2,ssim_axis3");
        const std::string row = r.to_csv_row("b");
        std::stringstream ss(row);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ','))
            fields.push_back(field);
        REQUIRE(fields.size() == 5);
        CHECK(fields[0] == "b");
        CHECK(std::stod(fields[1]) == doctest::Approx(r.psnr_3d).epsilon(1e-14));
        CHECK(std::stod(fields[2]) ==
              doctest::Approx(r.ssim_axis1).epsilon(1e-14));
        CHECK(std::stod(fields[4]) ==
              doctest::Approx(r.ssim_axis3).epsilon(1e-14));

        const auto j = nlohmann::json::parse(r.to_json("b"));
        CHECK(j["psnr_3d"].get<double>() ==
              doctest::Approx(r.psnr_3d).epsilon(1e-14));
    }
}
