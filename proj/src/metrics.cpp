#include "tpdm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "tpdm/errors.hpp"

namespace tpdm {

namespace {

constexpr int kWin = 11;
constexpr double kWinSigma = 1.5;
constexpr double kK1 = 0.01, kK2 = 0.03;

// Normalized 11x11 Gaussian window, computed once.
const std::vector<double>& gaussian_window() {
    static const std::vector<double> win = [] {
        std::vector<double> w(kWin * kWin);
        const int c = kWin / 2;
        double total = 0.0;
        for (int y = 0; y < kWin; ++y)
            for (int x = 0; x < kWin; ++x) {
                const double d2 = (y - c) * (y - c) + (x - c) * (x - c);
                w[y * kWin + x] =
                    std::exp(-d2 / (2.0 * kWinSigma * kWinSigma));
                total += w[y * kWin + x];
            }
        for (double& v : w)
            v /= total;
        return w;
    }();
    return win;
}

double clipped(double v, double range) {
    return std::clamp(v, 0.0, range);
}

} // namespace

double psnr3d(const Volume3D& x, const Volume3D& ref, double data_range) {
    if (x.shape() != ref.shape())
        throw dim_error("psnr3d: volume shape mismatch");
    if (!(data_range > 0.0))
        throw config_error("psnr3d: data_range must be > 0");
    double mse = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double d =
            clipped(x.data[i], data_range) - clipped(ref.data[i], data_range);
        mse += d * d;
    }
    mse /= static_cast<double>(x.data.size());
    if (mse == 0.0)
        return std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(data_range) - 10.0 * std::log10(mse);
}

double ssim2d(const Slice2D& a, const Slice2D& b, double data_range) {
    if (a.h != b.h || a.w != b.w)
        throw dim_error("ssim2d: slice shape mismatch");
    if (a.h < kWin || a.w < kWin)
        throw dim_error("ssim2d: slice smaller than the 11x11 window");
    if (!(data_range > 0.0))
        throw config_error("ssim2d: data_range must be > 0");

    const auto& win = gaussian_window();
    const double c1 = (kK1 * data_range) * (kK1 * data_range);
    const double c2 = (kK2 * data_range) * (kK2 * data_range);

    double total = 0.0;
    const int ny = a.h - kWin + 1, nx = a.w - kWin + 1;
    for (int y0 = 0; y0 < ny; ++y0)
        for (int x0 = 0; x0 < nx; ++x0) {
            double ma = 0.0, mb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
            for (int y = 0; y < kWin; ++y)
                for (int x = 0; x < kWin; ++x) {
                    const double wv = win[y * kWin + x];
                    const double va =
                        clipped(a.at(y0 + y, x0 + x), data_range);
                    const double vb =
                        clipped(b.at(y0 + y, x0 + x), data_range);
                    ma += wv * va;
                    mb += wv * vb;
                    saa += wv * va * va;
                    sbb += wv * vb * vb;
                    sab += wv * va * vb;
                }
            const double var_a = saa - ma * ma;
            const double var_b = sbb - mb * mb;
            const double cov = sab - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
                     ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
        }
    return total / (static_cast<double>(ny) * nx);
}

double ssim_direction_mean(const Volume3D& x, const Volume3D& ref, int axis,
                           double data_range) {
    if (x.shape() != ref.shape())
        throw dim_error("ssim_direction_mean: volume shape mismatch");
    if (axis < 1 || axis > 3)
        throw config_error("ssim_direction_mean: axis must be 1, 2, or 3");

    // Extract the j-th plane perpendicular to the given axis.
    auto plane = [&](const Volume3D& v, int j) {
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

    const int count = axis == 1 ? x.d1 : axis == 2 ? x.d2 : x.d3;
    double total = 0.0;
    for (int j = 0; j < count; ++j)
        total += ssim2d(plane(x, j), plane(ref, j), data_range);
    return total / count;
}

namespace {

std::string number_or_inf(double v) {
    if (std::isinf(v))
        return "inf";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace

std::string MetricReport::to_json(const std::string& run_id) const {
    nlohmann::json j;
    j["run_id"] = run_id;
    if (std::isinf(psnr_3d))
        j["psnr_3d"] = "inf";
    else
        j["psnr_3d"] = psnr_3d;
    j["ssim_axis1"] = ssim_axis1;
    j["ssim_axis2"] = ssim_axis2;
    j["ssim_axis3"] = ssim_axis3;
    return j.dump(2);
}

std::string MetricReport::csv_header() {
    return "run_id,psnr_3d,ssim_axis1,ssim_axis2,ssim_axis3";
}

std::string MetricReport::to_csv_row(const std::string& run_id) const {
    std::ostringstream os;
    os.precision(17);
    os << run_id << "," << number_or_inf(psnr_3d) << "," << ssim_axis1 << ","
       << ssim_axis2 << "," << ssim_axis3;
    return os.str();
}

MetricReport evaluate_metrics(const Volume3D& x, const Volume3D& ref,
                              double data_range) {
    MetricReport r;
    r.psnr_3d = psnr3d(x, ref, data_range);
    r.ssim_axis1 = ssim_direction_mean(x, ref, 1, data_range);
    r.ssim_axis2 = ssim_direction_mean(x, ref, 2, data_range);
    r.ssim_axis3 = ssim_direction_mean(x, ref, 3, data_range);
    return r;
}

} // namespace tpdm
