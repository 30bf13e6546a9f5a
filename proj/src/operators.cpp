#include "tpdm/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include <fftw3.h>

#include "tpdm/errors.hpp"
#include "tpdm/rng.hpp"

namespace tpdm {

namespace {

void require_in_shape(const Slice2D& x, std::array<int, 2> shape,
                      const char* who) {
    if (x.h != shape[0] || x.w != shape[1])
        throw dim_error(std::string(who) + ": input shape (" +
                        std::to_string(x.h) + "," + std::to_string(x.w) +
                        ") does not match operator (" +
                        std::to_string(shape[0]) + "," +
                        std::to_string(shape[1]) + ")");
}

void require_out_shape(const Measurement2D& m, std::array<int, 2> shape,
                       bool complex_valued, const char* who) {
    if (m.h != shape[0] || m.w != shape[1])
        throw dim_error(std::string(who) + ": measurement shape (" +
                        std::to_string(m.h) + "," + std::to_string(m.w) +
                        ") does not match operator (" +
                        std::to_string(shape[0]) + "," +
                        std::to_string(shape[1]) + ")");
    if (m.complex_valued != complex_valued)
        throw dim_error(std::string(who) +
                        ": measurement real/complex kind mismatch");
}

} // namespace

double dot(const Measurement2D& a, const Measurement2D& b) {
    if (a.h != b.h || a.w != b.w || a.complex_valued != b.complex_valued)
        throw dim_error("dot: measurement shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.re.size(); ++i)
        acc += a.re[i] * b.re[i];
    if (a.complex_valued)
        for (std::size_t i = 0; i < a.im.size(); ++i)
            acc += a.im[i] * b.im[i];
    return acc;
}

double dot(const Slice2D& a, const Slice2D& b) {
    if (a.h != b.h || a.w != b.w)
        throw dim_error("dot: slice shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        acc += a.data[i] * b.data[i];
    return acc;
}

Measurement2D stack_plane(const MeasurementStack& stack, int j) {
    if (j < 0 || j >= stack.n)
        throw std::out_of_range("stack_plane: plane index " + std::to_string(j) +
                                " outside [0, " + std::to_string(stack.n) + ")");
    Measurement2D m(stack.h, stack.w, stack.complex_valued);
    const std::size_t off = static_cast<std::size_t>(j) * stack.plane_size();
    std::copy_n(stack.re.begin() + static_cast<std::ptrdiff_t>(off), m.re.size(),
                m.re.begin());
    if (stack.complex_valued)
        std::copy_n(stack.im.begin() + static_cast<std::ptrdiff_t>(off),
                    m.im.size(), m.im.begin());
    return m;
}

void set_stack_plane(MeasurementStack& stack, int j, const Measurement2D& m) {
    if (j < 0 || j >= stack.n)
        throw std::out_of_range("set_stack_plane: plane index " +
                                std::to_string(j) + " outside [0, " +
                                std::to_string(stack.n) + ")");
    if (m.h != stack.h || m.w != stack.w ||
        m.complex_valued != stack.complex_valued)
        throw dim_error("set_stack_plane: plane shape mismatch");
    const std::size_t off = static_cast<std::size_t>(j) * stack.plane_size();
    std::copy(m.re.begin(), m.re.end(),
              stack.re.begin() + static_cast<std::ptrdiff_t>(off));
    if (stack.complex_valued)
        std::copy(m.im.begin(), m.im.end(),
                  stack.im.begin() + static_cast<std::ptrdiff_t>(off));
}

// ---- IdentityOperator -------------------------------------------------

Measurement2D IdentityOperator::apply(const Slice2D& x) const {
    require_in_shape(x, {h_, w_}, "identity apply");
    Measurement2D m(h_, w_, false);
    m.re = x.data;
    return m;
}

Slice2D IdentityOperator::adjoint(const Measurement2D& m) const {
    require_out_shape(m, {h_, w_}, false, "identity adjoint");
    Slice2D s(h_, w_);
    s.data = m.re;
    return s;
}

// ---- ZMergeOperator ---------------------------------------------------

ZMergeOperator::ZMergeOperator(int h, int w, int M, MergeVariant variant,
                               MergeAxis merge_axis)
    : h_(h), w_(w), M_(M), variant_(variant), axis_(merge_axis) {
    if (h < 1 || w < 1)
        throw dim_error("zmerge: slice extents must be positive");
    if (M < 1)
        throw dim_error("zmerge: merge size must be >= 1");
    const int extent = merge_axis == MergeAxis::Rows ? h : w;
    if (extent % M != 0)
        throw dim_error("zmerge: extent " + std::to_string(extent) +
                        " not divisible by merge size " + std::to_string(M) +
                        " (no implicit padding)");
}

std::array<int, 2> ZMergeOperator::out_shape() const {
    return axis_ == MergeAxis::Rows ? std::array<int, 2>{h_ / M_, w_}
                                    : std::array<int, 2>{h_, w_ / M_};
}

Measurement2D ZMergeOperator::apply(const Slice2D& x) const {
    require_in_shape(x, {h_, w_}, "zmerge apply");
    const auto os = out_shape();
    Measurement2D m(os[0], os[1], false);
    const double scale = variant_ == MergeVariant::Mean
                             ? 1.0 / M_
                             : 1.0 / std::sqrt(static_cast<double>(M_));
    if (axis_ == MergeAxis::Rows) {
        for (int r = 0; r < os[0]; ++r)
            for (int c = 0; c < os[1]; ++c) {
                double acc = 0.0;
                for (int k = 0; k < M_; ++k)
                    acc += x.at(r * M_ + k, c);
                m.re[static_cast<std::size_t>(r) * os[1] + c] = acc * scale;
            }
    } else {
        for (int r = 0; r < os[0]; ++r)
            for (int c = 0; c < os[1]; ++c) {
                double acc = 0.0;
                for (int k = 0; k < M_; ++k)
                    acc += x.at(r, c * M_ + k);
                m.re[static_cast<std::size_t>(r) * os[1] + c] = acc * scale;
            }
    }
    return m;
}

Slice2D ZMergeOperator::adjoint(const Measurement2D& m) const {
    require_out_shape(m, out_shape(), false, "zmerge adjoint");
    Slice2D s(h_, w_);
    const double scale = variant_ == MergeVariant::Mean
                             ? 1.0 / M_
                             : 1.0 / std::sqrt(static_cast<double>(M_));
    const auto os = out_shape();
    if (axis_ == MergeAxis::Rows) {
        for (int r = 0; r < os[0]; ++r)
            for (int c = 0; c < os[1]; ++c) {
                const double v =
                    m.re[static_cast<std::size_t>(r) * os[1] + c] * scale;
                for (int k = 0; k < M_; ++k)
                    s.at(r * M_ + k, c) = v;
            }
    } else {
        for (int r = 0; r < os[0]; ++r)
            for (int c = 0; c < os[1]; ++c) {
                const double v =
                    m.re[static_cast<std::size_t>(r) * os[1] + c] * scale;
                for (int k = 0; k < M_; ++k)
                    s.at(r, c * M_ + k) = v;
            }
    }
    return s;
}

Measurement2D zmerge_apply(const Slice2D& x, int M, MergeVariant variant,
                           MergeAxis merge_axis) {
    return ZMergeOperator(x.h, x.w, M, variant, merge_axis).apply(x);
}

Slice2D zmerge_adjoint(const Measurement2D& m, int M, MergeVariant variant,
                       MergeAxis merge_axis) {
    const int h = merge_axis == MergeAxis::Rows ? m.h * M : m.h;
    const int w = merge_axis == MergeAxis::Cols ? m.w * M : m.w;
    return ZMergeOperator(h, w, M, variant, merge_axis).adjoint(m);
}

// ---- Poisson mask -----------------------------------------------------

std::int64_t KSpaceMask::kept_count() const {
    return std::count_if(keep.begin(), keep.end(),
                         [](std::uint8_t v) { return v != 0; });
}

namespace {

// One dart-throwing pass at a fixed base radius.  The candidate sequence
// depends only on the seed, so bisection trials see identical darts and
// the kept count is (near-)monotone in r0.
void throw_darts(KSpaceMask& mask, double r0, std::uint64_t seed) {
    const int h = mask.h, w = mask.w;
    const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    const double dmax = std::sqrt(cy * cy + cx * cx);

    // Uniform bucket grid over accepted points for the spacing test.
    const double bucket = std::max(1.0, r0);
    const int bh = static_cast<int>(std::ceil(h / bucket));
    const int bw = static_cast<int>(std::ceil(w / bucket));
    std::vector<std::vector<std::pair<int, int>>> buckets(
        static_cast<std::size_t>(bh) * bw);
    auto bucket_of = [&](int r, int c) {
        return static_cast<std::size_t>(static_cast<int>(r / bucket)) * bw +
               static_cast<int>(c / bucket);
    };
    auto insert_point = [&](int r, int c) {
        mask.keep[static_cast<std::size_t>(r) * w + c] = 1;
        buckets[bucket_of(r, c)].emplace_back(r, c);
    };

    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            if (mask.at(r, c)) {
                mask.keep[static_cast<std::size_t>(r) * w + c] = 0;
                insert_point(r, c);
            }

    const std::int64_t attempts = 30ll * h * w;
    for (std::int64_t a = 0; a < attempts; ++a) {
        const int r = static_cast<int>(
            rng_uniform(seed, RngDomain::Mask, 0, 0, 2 * a) * h);
        const int c = static_cast<int>(
            rng_uniform(seed, RngDomain::Mask, 0, 0, 2 * a + 1) * w);
        if (mask.at(r, c))
            continue;
        const double d = std::hypot(r - cy, c - cx);
        const double radius = r0 * (1.0 + d / dmax);
        // Scan buckets covering the spacing disc.
        const int span = static_cast<int>(std::ceil(radius / bucket)) + 1;
        const int br = static_cast<int>(r / bucket);
        const int bc = static_cast<int>(c / bucket);
        bool ok = true;
        for (int by = std::max(0, br - span);
             ok && by <= std::min(bh - 1, br + span); ++by)
            for (int bx = std::max(0, bc - span);
                 ok && bx <= std::min(bw - 1, bc + span); ++bx)
                for (const auto& [pr, pc] :
                     buckets[static_cast<std::size_t>(by) * bw + bx])
                    if (std::hypot(r - pr, c - pc) < radius) {
                        ok = false;
                        break;
                    }
        if (ok)
            insert_point(r, c);
    }
}

} // namespace

KSpaceMask poisson_mask(int h, int w, double R, double center_frac,
                        std::uint64_t seed) {
    if (h < 1 || w < 1)
        throw dim_error("poisson_mask: grid extents must be positive");
    if (!(R >= 1.0))
        throw config_error("poisson_mask: acceleration R must be >= 1");
    if (!(center_frac >= 0.0 && center_frac < 1.0))
        throw config_error("poisson_mask: center_frac must be in [0, 1)");

    KSpaceMask mask;
    mask.h = h;
    mask.w = w;
    mask.R = R;
    mask.seed = seed;
    mask.center_h = static_cast<int>(std::ceil(center_frac * h));
    mask.center_w = static_cast<int>(std::ceil(center_frac * w));
    mask.keep.assign(static_cast<std::size_t>(h) * w, 0);

    if (R == 1.0) {
        std::fill(mask.keep.begin(), mask.keep.end(), std::uint8_t{1});
        return mask;
    }

    const auto set_center = [&] {
        const int r0 = (h - mask.center_h) / 2;
        const int c0 = (w - mask.center_w) / 2;
        for (int r = r0; r < r0 + mask.center_h; ++r)
            for (int c = c0; c < c0 + mask.center_w; ++c)
                mask.keep[static_cast<std::size_t>(r) * w + c] = 1;
    };

    const double total = static_cast<double>(h) * w;
    const double lo_frac = 0.8 / R, hi_frac = 1.2 / R;
    set_center();
    if (static_cast<double>(mask.kept_count()) > hi_frac * total)
        throw feasibility_error(
            "poisson_mask: fully-sampled center already exceeds the target "
            "fraction for R=" + std::to_string(R));

    double lo = 0.25, hi = static_cast<double>(std::max(h, w));
    for (int iter = 0; iter < 60; ++iter) {
        const double r0 = 0.5 * (lo + hi);
        std::fill(mask.keep.begin(), mask.keep.end(), std::uint8_t{0});
        set_center();
        throw_darts(mask, r0, seed);
        const double frac = static_cast<double>(mask.kept_count()) / total;
        if (frac >= lo_frac && frac <= hi_frac)
            return mask;
        if (frac > hi_frac)
            lo = r0; // too dense: widen spacing
        else
            hi = r0; // too sparse: tighten spacing
    }
    throw feasibility_error(
        "poisson_mask: could not reach kept fraction in [0.8/R, 1.2/R] for "
        "R=" + std::to_string(R) + " on a " + std::to_string(h) + "x" +
        std::to_string(w) + " grid");
}

// ---- KSpaceOperator ---------------------------------------------------

struct KSpaceOperator::Plans {
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;
    ~Plans() {
        if (forward)
            fftw_destroy_plan(forward);
        if (backward)
            fftw_destroy_plan(backward);
    }
};

KSpaceOperator::KSpaceOperator(KSpaceMask mask)
    : mask_(std::move(mask)), plans_(std::make_unique<Plans>()) {
    if (mask_.h < 1 || mask_.w < 1 ||
        mask_.keep.size() != static_cast<std::size_t>(mask_.h) * mask_.w)
        throw dim_error("kspace: malformed mask");
    // Plan once against scratch buffers; execution uses fftw_execute_dft
    // with per-call arrays (thread-safe, unlike planning).
    std::vector<fftw_complex> scratch_in(mask_.keep.size());
    std::vector<fftw_complex> scratch_out(mask_.keep.size());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    plans_->forward =
        fftw_plan_dft_2d(mask_.h, mask_.w, scratch_in.data(),
                         scratch_out.data(), FFTW_FORWARD, flags);
    plans_->backward =
        fftw_plan_dft_2d(mask_.h, mask_.w, scratch_in.data(),
                         scratch_out.data(), FFTW_BACKWARD, flags);
    if (!plans_->forward || !plans_->backward)
        throw io_error("kspace: FFT planning failed");
}

KSpaceOperator::~KSpaceOperator() = default;

std::array<int, 2> KSpaceOperator::in_shape() const {
    return {mask_.h, mask_.w};
}
std::array<int, 2> KSpaceOperator::out_shape() const {
    return {mask_.h, mask_.w};
}

Measurement2D KSpaceOperator::apply(const Slice2D& x) const {
    require_in_shape(x, in_shape(), "kspace apply");
    const int h = mask_.h, w = mask_.w;
    const std::size_t n = static_cast<std::size_t>(h) * w;
    std::vector<fftw_complex> buf_in(n), buf_out(n);
    // ifftshift gather: DC moves from the grid center to index 0.
    for (int r = 0; r < h; ++r) {
        const int sr = (r + h / 2) % h;
        for (int c = 0; c < w; ++c) {
            const int sc = (c + w / 2) % w;
            buf_in[static_cast<std::size_t>(r) * w + c][0] =
                x.data[static_cast<std::size_t>(sr) * w + sc];
            buf_in[static_cast<std::size_t>(r) * w + c][1] = 0.0;
        }
    }
    fftw_execute_dft(plans_->forward, buf_in.data(), buf_out.data());
    Measurement2D m(h, w, true);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    // fftshift gather + orthonormal scaling + mask.
    for (int r = 0; r < h; ++r) {
        const int sr = (r - h / 2 + h) % h;
        for (int c = 0; c < w; ++c) {
            const int sc = (c - w / 2 + w) % w;
            const std::size_t i = static_cast<std::size_t>(r) * w + c;
            if (mask_.at(r, c)) {
                m.re[i] = buf_out[static_cast<std::size_t>(sr) * w + sc][0] *
                          scale;
                m.im[i] = buf_out[static_cast<std::size_t>(sr) * w + sc][1] *
                          scale;
            }
        }
    }
    return m;
}

Slice2D KSpaceOperator::adjoint(const Measurement2D& m) const {
    require_out_shape(m, out_shape(), true, "kspace adjoint");
    const int h = mask_.h, w = mask_.w;
    const std::size_t n = static_cast<std::size_t>(h) * w;
    std::vector<fftw_complex> buf_in(n), buf_out(n);
    // Mask, then the same ifftshift gather as the forward direction (the
    // adjoint of a unitary centered DFT is the centered inverse DFT).
    for (int r = 0; r < h; ++r) {
        const int sr = (r + h / 2) % h;
        for (int c = 0; c < w; ++c) {
            const int sc = (c + w / 2) % w;
            const std::size_t src = static_cast<std::size_t>(sr) * w + sc;
            const std::size_t dst = static_cast<std::size_t>(r) * w + c;
            if (mask_.keep[src] != 0) {
                buf_in[dst][0] = m.re[src];
                buf_in[dst][1] = m.im[src];
            } else {
                buf_in[dst][0] = 0.0;
                buf_in[dst][1] = 0.0;
            }
        }
    }
    fftw_execute_dft(plans_->backward, buf_in.data(), buf_out.data());
    Slice2D s(h, w);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int r = 0; r < h; ++r) {
        const int sr = (r - h / 2 + h) % h;
        for (int c = 0; c < w; ++c) {
            const int sc = (c - w / 2 + w) % w;
            s.data[static_cast<std::size_t>(r) * w + c] =
                buf_out[static_cast<std::size_t>(sr) * w + sc][0] * scale;
        }
    }
    return s;
}

Measurement2D kspace_apply(const Slice2D& x, const KSpaceMask& mask) {
    return KSpaceOperator(mask).apply(x);
}

// ---- RadonOperator ----------------------------------------------------

RadonGeometry::RadonGeometry(int n_angles_, int width_)
    : n_angles(n_angles_), width(width_) {
    if (n_angles_ < 1)
        throw dim_error("radon: need at least one projection angle");
    if (width_ < 2)
        throw dim_error("radon: slice width must be >= 2");
    angles.resize(n_angles_);
    for (int a = 0; a < n_angles_; ++a)
        angles[a] = a * std::numbers::pi / n_angles_;
}

RadonOperator::RadonOperator(RadonGeometry geom) : geom_(std::move(geom)) {
    const int w = geom_.width;
    const int n_rays = geom_.n_angles * w;
    const double cx = (w - 1) / 2.0;   // image center (pixel coordinates)
    const double Rs = w / 2.0;         // inscribed-disc support radius
    const int nk = static_cast<int>(std::ceil(Rs));

    row_ptr_.assign(n_rays + 1, 0);
    std::vector<double> accum(static_cast<std::size_t>(w) * w, 0.0);
    std::vector<int> touched;
    touched.reserve(8 * (2 * nk + 2));

    for (int a = 0; a < geom_.n_angles; ++a) {
        const double th = geom_.angles[a];
        const double nx = std::cos(th), ny = std::sin(th);
        const double dx = -std::sin(th), dy = std::cos(th);
        for (int det = 0; det < w; ++det) {
            const double s = det - cx;
            // Unit-step samples along the ray, bilinear spread at each.
            for (int k = -nk; k <= nk; ++k) {
                const double px = s * nx + k * dx;
                const double py = s * ny + k * dy;
                const double fx = px + cx, fy = py + cx;
                const int ix = static_cast<int>(std::floor(fx));
                const int iy = static_cast<int>(std::floor(fy));
                const double ax = fx - ix, ay = fy - iy;
                const double wy[2] = {1.0 - ay, ay};
                const double wx[2] = {1.0 - ax, ax};
                for (int oy = 0; oy < 2; ++oy)
                    for (int ox = 0; ox < 2; ++ox) {
                        const int r = iy + oy, c = ix + ox;
                        if (r < 0 || r >= w || c < 0 || c >= w)
                            continue;
                        // Pixels outside the inscribed disc are zero.
                        const double qx = c - cx, qy = r - cx;
                        if (qx * qx + qy * qy > Rs * Rs)
                            continue;
                        const double wgt = wy[oy] * wx[ox];
                        if (wgt <= 0.0)
                            continue;
                        const std::size_t pix =
                            static_cast<std::size_t>(r) * w + c;
                        if (accum[pix] == 0.0)
                            touched.push_back(static_cast<int>(pix));
                        accum[pix] += wgt;
                    }
            }
            // Compress this ray's coalesced weights in pixel order.
            std::sort(touched.begin(), touched.end());
            for (int pix : touched) {
                col_.push_back(pix);
                wgt_.push_back(accum[pix]);
                accum[pix] = 0.0;
            }
            touched.clear();
            row_ptr_[static_cast<std::size_t>(a) * w + det + 1] =
                static_cast<std::int64_t>(col_.size());
        }
    }

    // Transposed structure: per pixel, (ray, weight) in ray order.
    const std::size_t n_pix = static_cast<std::size_t>(w) * w;
    t_row_ptr_.assign(n_pix + 1, 0);
    for (int pix : col_)
        ++t_row_ptr_[pix + 1];
    for (std::size_t p = 0; p < n_pix; ++p)
        t_row_ptr_[p + 1] += t_row_ptr_[p];
    t_col_.resize(col_.size());
    t_wgt_.resize(col_.size());
    std::vector<std::int64_t> cursor(t_row_ptr_.begin(),
                                     t_row_ptr_.end() - 1);
    for (int ray = 0; ray < n_rays; ++ray)
        for (std::int64_t e = row_ptr_[ray]; e < row_ptr_[ray + 1]; ++e) {
            const std::int64_t slot = cursor[col_[e]]++;
            t_col_[slot] = ray;
            t_wgt_[slot] = wgt_[e];
        }
}

std::array<int, 2> RadonOperator::in_shape() const {
    return {geom_.width, geom_.width};
}
std::array<int, 2> RadonOperator::out_shape() const {
    return {geom_.n_angles, geom_.width};
}

Measurement2D RadonOperator::apply(const Slice2D& x) const {
    if (x.h != x.w)
        throw dim_error("radon apply: slice must be square");
    require_in_shape(x, in_shape(), "radon apply");
    Measurement2D sino(geom_.n_angles, geom_.width, false);
    const int n_rays = geom_.n_angles * geom_.width;
    for (int ray = 0; ray < n_rays; ++ray) {
        double acc = 0.0;
        for (std::int64_t e = row_ptr_[ray]; e < row_ptr_[ray + 1]; ++e)
            acc += wgt_[e] * x.data[col_[e]];
        sino.re[ray] = acc;
    }
    return sino;
}

Slice2D RadonOperator::adjoint(const Measurement2D& sino) const {
    require_out_shape(sino, out_shape(), false, "radon adjoint");
    Slice2D s(geom_.width, geom_.width);
    const std::size_t n_pix = s.size();
    for (std::size_t pix = 0; pix < n_pix; ++pix) {
        double acc = 0.0;
        for (std::int64_t e = t_row_ptr_[pix]; e < t_row_ptr_[pix + 1]; ++e)
            acc += t_wgt_[e] * sino.re[t_col_[e]];
        s.data[pix] = acc;
    }
    return s;
}

Measurement2D radon_apply(const Slice2D& x, const RadonGeometry& geom) {
    return RadonOperator(geom).apply(x);
}

Slice2D radon_adjoint(const Measurement2D& sino, const RadonGeometry& geom) {
    return RadonOperator(geom).adjoint(sino);
}

// ---- residual gradient ------------------------------------------------

Slice2D residual_grad(const MeasurementOperator& op, const Slice2D& x_hat,
                      const Measurement2D& y) {
    Measurement2D r = op.apply(x_hat);
    if (r.h != y.h || r.w != y.w || r.complex_valued != y.complex_valued)
        throw dim_error("residual_grad: measurement shape mismatch");
    for (std::size_t i = 0; i < r.re.size(); ++i)
        r.re[i] -= y.re[i];
    if (r.complex_valued)
        for (std::size_t i = 0; i < r.im.size(); ++i)
            r.im[i] -= y.im[i];
    Slice2D g = op.adjoint(r);
    for (double& v : g.data)
        v *= 2.0;
    return g;
}

} // namespace tpdm
