#pragma once

// Evaluation metrics: PSNR over the full 3D volume and mean 2D SSIM per
// slice direction.  Inputs are clipped to [0, data_range] first, since
// sampled volumes can slightly overshoot the nominal range.

#include <filesystem>
#include <string>

#include "tpdm/volume.hpp"

namespace tpdm {

// 20*log10(range) - 10*log10(MSE) over all voxels; identical volumes
// give the +infinity sentinel.
double psnr3d(const Volume3D& x, const Volume3D& ref, double data_range = 1.0);

// Mean local SSIM over all fully-interior 11x11 windows, Gaussian
// weights (sigma = 1.5), C1 = (0.01 r)^2, C2 = (0.03 r)^2.  Requires
// both extents >= 11.
double ssim2d(const Slice2D& a, const Slice2D& b, double data_range = 1.0);

// Mean of ssim2d over all slices along one volume axis (1, 2, or 3).
double ssim_direction_mean(const Volume3D& x, const Volume3D& ref, int axis,
                           double data_range = 1.0);

struct MetricReport {
    double psnr_3d = 0.0;
    double ssim_axis1 = 0.0;
    double ssim_axis2 = 0.0;
    double ssim_axis3 = 0.0;

    // Infinite PSNR serializes as the string "inf" (JSON has no inf).
    std::string to_json(const std::string& run_id) const;
    std::string to_csv_row(const std::string& run_id) const;
    static std::string csv_header();
};

MetricReport evaluate_metrics(const Volume3D& x, const Volume3D& ref,
                              double data_range = 1.0);

} // namespace tpdm
