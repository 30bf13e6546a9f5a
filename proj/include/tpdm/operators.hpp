#pragma once

// Per-slice forward measurement operators with exact adjoints:
//  - ZMerge: thick-slice averaging along one slice axis (Mean and RootM
//    scalings),
//  - KSpace: centered orthonormal 2D DFT followed by a sampling mask,
//  - Radon: sparse-view parallel-beam projector (precomputed sparse
//    matrix, adjoint = exact transpose),
// plus variable-density Poisson mask generation and the gradient of the
// data-fidelity term.

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "tpdm/volume.hpp"

namespace tpdm {

// Real or complex measurement plane.
struct Measurement2D {
    int h = 0, w = 0;
    bool complex_valued = false;
    std::vector<double> re;
    std::vector<double> im; // empty when real

    Measurement2D() = default;
    Measurement2D(int h_, int w_, bool complex_valued_)
        : h(h_), w(w_), complex_valued(complex_valued_),
          re(static_cast<std::size_t>(h_) * w_, 0.0),
          im(complex_valued_ ? static_cast<std::size_t>(h_) * w_ : 0, 0.0) {}

    std::size_t size() const { return re.size(); }
};

// Real inner product <a, b> = sum(re*re) + sum(im*im).
double dot(const Measurement2D& a, const Measurement2D& b);
double dot(const Slice2D& a, const Slice2D& b);

// Plane j of a measurement stack (planes are stored contiguously).
Measurement2D stack_plane(const MeasurementStack& stack, int j);
void set_stack_plane(MeasurementStack& stack, int j, const Measurement2D& m);

// Linear forward map A with adjoint, acting on one slice.  Instances are
// immutable after construction and safe for concurrent apply/adjoint.
class MeasurementOperator {
  public:
    virtual ~MeasurementOperator() = default;

    virtual Measurement2D apply(const Slice2D& x) const = 0;
    virtual Slice2D adjoint(const Measurement2D& m) const = 0;

    virtual std::array<int, 2> in_shape() const = 0;
    virtual std::array<int, 2> out_shape() const = 0;
    virtual bool complex_output() const { return false; }
};

// A = I; oracle/testing plumbing.
class IdentityOperator final : public MeasurementOperator {
  public:
    IdentityOperator(int h, int w) : h_(h), w_(w) {}
    Measurement2D apply(const Slice2D& x) const override;
    Slice2D adjoint(const Measurement2D& m) const override;
    std::array<int, 2> in_shape() const override { return {h_, w_}; }
    std::array<int, 2> out_shape() const override { return {h_, w_}; }

  private:
    int h_, w_;
};

// ---- Z-axis slice merge ----------------------------------------------

enum class MergeVariant { Mean, RootM };
enum class MergeAxis { Rows, Cols };

// Groups of M consecutive lines along merge_axis reduced to one line:
// sum/M (Mean) or sum/sqrt(M) (RootM).  The RootM variant satisfies
// A A^T = I, which keeps DPS guidance well-scaled.
class ZMergeOperator final : public MeasurementOperator {
  public:
    ZMergeOperator(int h, int w, int M, MergeVariant variant,
                   MergeAxis merge_axis);
    Measurement2D apply(const Slice2D& x) const override;
    Slice2D adjoint(const Measurement2D& m) const override;
    std::array<int, 2> in_shape() const override { return {h_, w_}; }
    std::array<int, 2> out_shape() const override;
    int merge_size() const { return M_; }

  private:
    int h_, w_, M_;
    MergeVariant variant_;
    MergeAxis axis_;
};

// Free-function forms (spec operations); one-shot construction.
Measurement2D zmerge_apply(const Slice2D& x, int M, MergeVariant variant,
                           MergeAxis merge_axis);
Slice2D zmerge_adjoint(const Measurement2D& m, int M, MergeVariant variant,
                       MergeAxis merge_axis);

// ---- k-space masking --------------------------------------------------

struct KSpaceMask {
    int h = 0, w = 0;
    std::vector<std::uint8_t> keep; // h*w booleans
    double R = 1.0;
    int center_h = 0, center_w = 0; // fully-sampled center block extents
    std::uint64_t seed = 0;

    bool at(int r, int c) const {
        return keep[static_cast<std::size_t>(r) * w + c] != 0;
    }
    std::int64_t kept_count() const;
};

// Variable-density dart throwing: minimum spacing r(d) = r0*(1 + d/dmax)
// grows away from the k-space center; a ceil(center_frac*h) x
// ceil(center_frac*w) central block is always fully sampled; r0 is tuned
// by bisection until the kept fraction lies in [0.8/R, 1.2/R].
// Deterministic given the seed.  Throws feasibility_error when the
// target fraction is unreachable on the grid.
KSpaceMask poisson_mask(int h, int w, double R, double center_frac,
                        std::uint64_t seed);

// Centered (DC at floor(n/2)) orthonormal 2D DFT, then elementwise mask.
// Adjoint is the inverse transform of the mask-zero-filled data (real
// part).  FFT plans are created at construction; construct instances on
// one thread, then apply/adjoint freely from many.
class KSpaceOperator final : public MeasurementOperator {
  public:
    explicit KSpaceOperator(KSpaceMask mask);
    ~KSpaceOperator() override;
    KSpaceOperator(const KSpaceOperator&) = delete;
    KSpaceOperator& operator=(const KSpaceOperator&) = delete;

    Measurement2D apply(const Slice2D& x) const override;
    Slice2D adjoint(const Measurement2D& m) const override;
    std::array<int, 2> in_shape() const override;
    std::array<int, 2> out_shape() const override;
    bool complex_output() const override { return true; }
    const KSpaceMask& mask() const { return mask_; }

  private:
    KSpaceMask mask_;
    struct Plans;
    std::unique_ptr<Plans> plans_;
};

Measurement2D kspace_apply(const Slice2D& x, const KSpaceMask& mask);

// ---- sparse-view radon -------------------------------------------------

// Parallel-beam geometry: n_angles uniform over [0, pi), detector count
// equal to the slice width, unit-step bilinear sampling along each ray,
// pixels outside the inscribed disc treated as zero.
struct RadonGeometry {
    int n_angles = 0;
    int width = 0; // slice width = detector count
    std::vector<double> angles;

    RadonGeometry() = default;
    RadonGeometry(int n_angles_, int width_);
};

// The discretized projector as an explicit sparse matrix (rows = rays in
// angle-major order, cols = pixels); the adjoint back-distributes
// through the transposed structure with a fixed summation order, so both
// directions are bit-deterministic.
class RadonOperator final : public MeasurementOperator {
  public:
    explicit RadonOperator(RadonGeometry geom);
    Measurement2D apply(const Slice2D& x) const override;
    Slice2D adjoint(const Measurement2D& m) const override;
    std::array<int, 2> in_shape() const override;
    std::array<int, 2> out_shape() const override;
    const RadonGeometry& geometry() const { return geom_; }

  private:
    RadonGeometry geom_;
    // CSR over rays.
    std::vector<std::int64_t> row_ptr_;
    std::vector<int> col_;
    std::vector<double> wgt_;
    // Transposed structure (per pixel, ray-ordered) for the adjoint.
    std::vector<std::int64_t> t_row_ptr_;
    std::vector<int> t_col_;
    std::vector<double> t_wgt_;
};

Measurement2D radon_apply(const Slice2D& x, const RadonGeometry& geom);
Slice2D radon_adjoint(const Measurement2D& sino, const RadonGeometry& geom);

// ---- per-slice operator bundle ----------------------------------------

// One operator shared by every primary slice (size 1), or one operator
// per slice (e.g. per-slice CS-MRI masks; size = number of slices).
struct OperatorHandle {
    std::vector<std::shared_ptr<MeasurementOperator>> per_slice;

    OperatorHandle() = default;
    explicit OperatorHandle(std::shared_ptr<MeasurementOperator> shared) {
        per_slice.push_back(std::move(shared));
    }

    const MeasurementOperator& for_slice(int j) const {
        return *per_slice[per_slice.size() == 1 ? 0
                                                : static_cast<std::size_t>(j)];
    }
    bool empty() const { return per_slice.empty(); }
};

// ---- data-fidelity gradient -------------------------------------------

// grad_{x_hat} |A(x_hat) - y|^2 = 2 * adjoint(apply(x_hat) - y); for
// complex measurements the adjoint of the complex residual (real output).
Slice2D residual_grad(const MeasurementOperator& op, const Slice2D& x_hat,
                      const Measurement2D& y);

} // namespace tpdm
