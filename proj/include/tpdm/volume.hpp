#pragma once

// 3D volume container, perpendicular slicing, and the TPDMVOL1 file
// format (f32 payloads; a "c64" variant holds complex measurement
// stacks).  Values are kept as double in memory and quantized to f32 on
// disk, so load(save(v)) is bit-exact whenever v holds f32-representable
// values, and save(load(p)) always reproduces p byte for byte.

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace tpdm {

// A 2D plane of intensities, row-major.
struct Slice2D {
    int h = 0;
    int w = 0;
    std::vector<double> data;

    Slice2D() = default;
    Slice2D(int h_, int w_, double fill = 0.0)
        : h(h_), w(w_), data(static_cast<std::size_t>(h_) * w_, fill) {}

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * w + c]; }
    double at(int r, int c) const {
        return data[static_cast<std::size_t>(r) * w + c];
    }
    std::size_t size() const { return data.size(); }
};

// The two slice families of the perpendicular decomposition:
//  - Axis3: planes x[:,:,j] of shape (d1,d2), j over d3 (primary family)
//  - Axis1: planes x[j,:,:] of shape (d2,d3), j over d1 (auxiliary family)
enum class SliceAxis { Axis3, Axis1 };

// d1 x d2 x d3 grid, row-major with axis1 slowest.
struct Volume3D {
    int d1 = 0, d2 = 0, d3 = 0;
    std::vector<double> data;

    Volume3D() = default;
    Volume3D(int a, int b, int c, double fill = 0.0);

    double& at(int a, int b, int c) {
        return data[(static_cast<std::size_t>(a) * d2 + b) * d3 + c];
    }
    double at(int a, int b, int c) const {
        return data[(static_cast<std::size_t>(a) * d2 + b) * d3 + c];
    }
    std::size_t size() const { return data.size(); }
    std::array<int, 3> shape() const { return {d1, d2, d3}; }

    // Extent along the axis a SliceAxis indexes over.
    int extent(SliceAxis axis) const {
        return axis == SliceAxis::Axis3 ? d3 : d1;
    }
};

// Copy out the indexed plane.  Throws std::out_of_range naming the axis
// and bound when the index is outside the volume.
Slice2D slice_extract(const Volume3D& vol, SliceAxis axis, int index);

// Overwrite the indexed plane; only that plane changes.  Throws
// dim_error on slice-shape mismatch.  Returns the mutated volume.
Volume3D& slice_insert(Volume3D& vol, SliceAxis axis, int index,
                       const Slice2D& s);

// Affine map of all values onto [0, 1]; a constant volume maps to all
// zeros (total on the degenerate min==max case).
Volume3D normalize(const Volume3D& vol);

// TPDMVOL1 container, f32 payload.
void save_volume(const Volume3D& vol, const std::filesystem::path& path);
Volume3D load_volume(const std::filesystem::path& path);

// A stack of n equally-shaped (h, w) measurement planes, real or
// complex.  Serialized as TPDMVOL1 with shape [h, w, n] and dtype "f32"
// or "c64" (interleaved re/im f32 per element).
struct MeasurementStack {
    int h = 0, w = 0, n = 0;
    bool complex_valued = false;
    std::vector<double> re;
    std::vector<double> im; // empty when real

    MeasurementStack() = default;
    MeasurementStack(int h_, int w_, int n_, bool complex_valued_);

    std::size_t plane_size() const {
        return static_cast<std::size_t>(h) * w;
    }
};

void save_stack(const MeasurementStack& stack,
                const std::filesystem::path& path);
MeasurementStack load_stack(const std::filesystem::path& path);

// 8-bit PGM export of one slice: values clipped to [0,1], scaled to
// 0..255.  Plumbing for visual inspection only.
void save_pgm(const Slice2D& s, const std::filesystem::path& path);

} // namespace tpdm
