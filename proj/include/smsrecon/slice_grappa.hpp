#ifndef SMSRECON_SLICE_GRAPPA_HPP
#define SMSRECON_SLICE_GRAPPA_HPP

// Slice separation for simultaneous multi-slice k-space.
//
// A per-slice, per-coil kernel is fit on calibration data so that a small
// window of the collapsed multi-slice k-space predicts each slice's k-space
// sample at the window center. Calibration sources/targets carry the
// inter-slice ky phase ramps, so kernels emit slices in the shifted frame;
// callers undo the ramp afterwards.
//
// row_stride spaces the source taps along ky. Stride 1 suits fully sampled
// input; stride R matches input whose ky lines are R apart.

#include <cstddef>
#include <vector>

#include "smsrecon/acquisition.hpp"
#include "smsrecon/coils.hpp"
#include "smsrecon/errors.hpp"
#include "smsrecon/fft.hpp"
#include "smsrecon/lstsq.hpp"
#include "smsrecon/tensor.hpp"

namespace smsrecon {

struct SliceGrappaKernels {
    std::size_t mb = 0;
    std::size_t nc = 0;
    std::size_t kh = 0;
    std::size_t kw = 0;
    std::size_t row_stride = 1;
    double tikhonov = 0.0; // weight actually used at fit time
    ComplexArray weights;  // [mb, nc_target, nc_source, kh, kw]
};

/// Fit slice-separation kernels from per-slice calibration blocks
/// (acs_per_slice: [mb, nc, acs_rows, nx], centered in the full ky grid).
/// tikhonov < 0 selects the scale-invariant default weight.
inline SliceGrappaKernels calibrate_slice_grappa(const ComplexArray& acs_per_slice,
                                                 const AcquisitionSpec& spec, std::size_t kh = 5,
                                                 std::size_t kw = 5, double tikhonov = -1.0,
                                                 std::size_t row_stride = 1) {
    if (acs_per_slice.ndim() != 4)
        throw ShapeError("calibrate_slice_grappa: expected [mb, nc, acs, nx]");
    const std::size_t mb = acs_per_slice.dim(0), nc = acs_per_slice.dim(1);
    const std::size_t nacs = acs_per_slice.dim(2), nx = acs_per_slice.dim(3);
    if (mb != spec.mb) throw ShapeError("calibrate_slice_grappa: slice count does not match spec");
    if (kh % 2 == 0 || kw % 2 == 0 || kh == 0 || kw == 0)
        throw ArgumentError("calibrate_slice_grappa: kernel dims must be odd");
    if (row_stride == 0) throw ArgumentError("calibrate_slice_grappa: row_stride must be >= 1");
    const std::size_t span_y = (kh - 1) * row_stride + 1;
    if (nacs < span_y || nx < kw)
        throw ArgumentError("calibrate_slice_grappa: calibration block smaller than kernel span");

    // Shift each slice block by its ky ramp, then sum to form the collapsed source.
    std::vector<ComplexArray> shifted(mb);
    ComplexArray collapsed = ComplexArray::zeros({nc, nacs, nx});
    for (std::size_t s = 0; s < mb; ++s) {
        shifted[s] = caipi_shift(acs_per_slice.slice(s), s, spec, /*invert=*/false);
        collapsed = add(collapsed, shifted[s]);
    }

    const std::size_t hy = (kh / 2) * row_stride, hx = kw / 2;
    const std::size_t n_r = nacs - span_y + 1, n_c = nx - kw + 1;
    const std::size_t n_rows = n_r * n_c, n_cols = nc * kh * kw;

    CMat A(n_rows, n_cols);
    CMat B(n_rows, mb * nc);
    std::size_t row = 0;
    for (std::size_t r = hy; r + hy < nacs; ++r)
        for (std::size_t c = hx; c + hx < nx; ++c, ++row) {
            std::size_t col = 0;
            for (std::size_t cs = 0; cs < nc; ++cs)
                for (std::size_t dy = 0; dy < kh; ++dy)
                    for (std::size_t dx = 0; dx < kw; ++dx, ++col)
                        A(row, col) = collapsed(cs, r + dy * row_stride - hy, c + dx - hx);
            for (std::size_t s = 0; s < mb; ++s)
                for (std::size_t ct = 0; ct < nc; ++ct) B(row, s * nc + ct) = shifted[s](ct, r, c);
        }

    const double lam = tikhonov < 0.0 ? default_tikhonov(A) : tikhonov;
    const CMat X = solve_regularized_lstsq(A, B, lam);

    SliceGrappaKernels k;
    k.mb = mb;
    k.nc = nc;
    k.kh = kh;
    k.kw = kw;
    k.row_stride = row_stride;
    k.tikhonov = lam;
    k.weights = ComplexArray::zeros({mb, nc, nc, kh, kw});
    for (std::size_t s = 0; s < mb; ++s)
        for (std::size_t ct = 0; ct < nc; ++ct) {
            std::size_t col = 0;
            for (std::size_t cs = 0; cs < nc; ++cs)
                for (std::size_t dy = 0; dy < kh; ++dy)
                    for (std::size_t dx = 0; dx < kw; ++dx, ++col)
                        k.weights(s, ct, cs, dy, dx) = X(col, s * nc + ct);
        }
    return k;
}

/// Apply separation kernels to collapsed k-space [nc, ny, nx] at every sample
/// (circular boundary), producing shifted-frame slice estimates [mb, nc, ny, nx].
inline ComplexArray apply_slice_grappa(const SliceGrappaKernels& k, const ComplexArray& sms_ksp) {
    if (sms_ksp.ndim() != 3) throw ShapeError("apply_slice_grappa: expected [nc, ny, nx]");
    if (sms_ksp.dim(0) != k.nc) throw ShapeError("apply_slice_grappa: coil count mismatch");
    const std::size_t nc = k.nc, ny = sms_ksp.dim(1), nx = sms_ksp.dim(2);
    const long hy = static_cast<long>(k.kh / 2) * static_cast<long>(k.row_stride);
    const long hx = static_cast<long>(k.kw / 2);

    ComplexArray out = ComplexArray::zeros({k.mb, nc, ny, nx});
    for (std::size_t s = 0; s < k.mb; ++s)
        for (std::size_t ct = 0; ct < nc; ++ct) {
            cxd* dst = out.data() + ((s * nc + ct) * ny) * nx;
            for (std::size_t cs = 0; cs < nc; ++cs)
                for (std::size_t dy = 0; dy < k.kh; ++dy)
                    for (std::size_t dx = 0; dx < k.kw; ++dx) {
                        const cxd w = k.weights(s, ct, cs, dy, dx);
                        if (w == cxd(0.0, 0.0)) continue;
                        const long oy = static_cast<long>(dy * k.row_stride) - hy;
                        const long ox = static_cast<long>(dx) - hx;
                        const cxd* src = sms_ksp.data() + (cs * ny) * nx;
                        for (std::size_t r = 0; r < ny; ++r) {
                            const std::size_t rr =
                                detail::wrap_index(static_cast<long>(r) + oy, ny);
                            cxd* drow = dst + r * nx;
                            const cxd* srow = src + rr * nx;
                            for (std::size_t c = 0; c < nx; ++c) {
                                const std::size_t cc =
                                    detail::wrap_index(static_cast<long>(c) + ox, nx);
                                drow[c] += w * srow[cc];
                            }
                        }
                    }
        }
    return out;
}

struct LFactorReport {
    RealArray matrix; // [mb, mb]; entry (i, j): energy in slice-i output per unit slice-j input
};

/// Probe inter-slice leakage: encode each probe image as a lone slice, collapse,
/// separate, and tabulate the output energy landing in every slice channel.
inline LFactorReport leakage_lfactor(const SliceGrappaKernels& k, const CoilSensitivities& maps,
                                     const AcquisitionSpec& spec, const ComplexArray& probes) {
    if (probes.ndim() != 3) throw ShapeError("leakage_lfactor: expected probes [mb, ny, nx]");
    if (probes.dim(0) != k.mb) throw ShapeError("leakage_lfactor: probe count mismatch");
    LFactorReport rep;
    rep.matrix = RealArray::zeros({k.mb, k.mb});
    for (std::size_t j = 0; j < k.mb; ++j) {
        const ComplexArray ksp_j = fft2c(maps.expand(probes.slice(j)));
        const double denom = norm2(ksp_j);
        if (denom == 0.0) throw DegenerateInputError("leakage_lfactor: probe image is zero");
        const ComplexArray sms_j = caipi_shift(ksp_j, j, spec, /*invert=*/false);
        const ComplexArray outs = apply_slice_grappa(k, sms_j);
        for (std::size_t i = 0; i < k.mb; ++i) {
            const double e = norm2(outs.slice(i));
            rep.matrix(i, j) = (e * e) / (denom * denom);
        }
    }
    return rep;
}

} // namespace smsrecon

#endif
