#ifndef SMSRECON_SPIRIT_HPP
#define SMSRECON_SPIRIT_HPP

// Self-consistent parallel-imaging reconstruction.
//
// A cross-coil interpolation kernel is calibrated so every k-space sample is
// predicted from its full neighborhood across all coils, excluding the
// sample itself. Reconstruction alternates kernel application with hard data
// consistency on the acquired lines.

#include <cstddef>
#include <string>

#include "smsrecon/errors.hpp"
#include "smsrecon/lstsq.hpp"
#include "smsrecon/mask.hpp"
#include "smsrecon/slice_grappa.hpp" // detail::wrap_index
#include "smsrecon/tensor.hpp"

namespace smsrecon {

struct SpiritKernel {
    std::size_t nc = 0;
    std::size_t kh = 0;
    std::size_t kw = 0;
    double tikhonov = 0.0;
    ComplexArray weights; // [nc_target, nc_source, kh, kw]; self-center tap is 0
};

/// Fit the self-consistency kernel on a fully sampled calibration block
/// (acs: [nc, acs_rows, nx]). tikhonov < 0 selects the scale-invariant default.
inline SpiritKernel calibrate_spirit(const ComplexArray& acs, std::size_t kh = 5,
                                     std::size_t kw = 5, double tikhonov = -1.0) {
    if (acs.ndim() != 3) throw ShapeError("calibrate_spirit: expected [nc, acs, nx]");
    const std::size_t nc = acs.dim(0), nacs = acs.dim(1), nx = acs.dim(2);
    if (kh % 2 == 0 || kw % 2 == 0 || kh == 0 || kw == 0)
        throw ArgumentError("calibrate_spirit: kernel dims must be odd");
    if (nacs < kh || nx < kw)
        throw ArgumentError("calibrate_spirit: calibration block smaller than kernel");

    const std::size_t hy = kh / 2, hx = kw / 2;
    const std::size_t n_rows = (nacs - kh + 1) * (nx - kw + 1);
    const std::size_t n_cols = nc * kh * kw;

    CMat A(n_rows, n_cols);
    CMat B(n_rows, nc);
    std::size_t row = 0;
    for (std::size_t r = hy; r + hy < nacs; ++r)
        for (std::size_t c = hx; c + hx < nx; ++c, ++row) {
            std::size_t col = 0;
            for (std::size_t cs = 0; cs < nc; ++cs)
                for (std::size_t dy = 0; dy < kh; ++dy)
                    for (std::size_t dx = 0; dx < kw; ++dx, ++col)
                        A(row, col) = acs(cs, r + dy - hy, c + dx - hx);
            for (std::size_t ct = 0; ct < nc; ++ct) B(row, ct) = acs(ct, r, c);
        }

    SpiritKernel k;
    k.nc = nc;
    k.kh = kh;
    k.kw = kw;
    k.weights = ComplexArray::zeros({nc, nc, kh, kw});

    // Per target coil: drop the column that would read the target sample itself.
    for (std::size_t ct = 0; ct < nc; ++ct) {
        const std::size_t self_col = (ct * kh + hy) * kw + hx;
        CMat At(n_rows, n_cols - 1);
        At.leftCols(self_col) = A.leftCols(self_col);
        At.rightCols(n_cols - 1 - self_col) = A.rightCols(n_cols - 1 - self_col);
        const double lam = tikhonov < 0.0 ? default_tikhonov(At) : tikhonov;
        if (ct == 0) k.tikhonov = lam;
        const CMat w = solve_regularized_lstsq(At, B.col(ct), lam);
        std::size_t col = 0;
        for (std::size_t cs = 0; cs < nc; ++cs)
            for (std::size_t dy = 0; dy < kh; ++dy)
                for (std::size_t dx = 0; dx < kw; ++dx, ++col) {
                    if (col == self_col) continue;
                    const std::size_t wcol = col < self_col ? col : col - 1;
                    k.weights(ct, cs, dy, dx) = w(wcol, 0);
                }
    }
    return k;
}

/// One pass of the interpolation operator over full k-space [nc, ny, nx]
/// (circular boundary). The self tap is zero, so output(r,c) never reads
/// input coil ct at (r,c).
inline ComplexArray apply_spirit(const SpiritKernel& k, const ComplexArray& ksp) {
    if (ksp.ndim() != 3) throw ShapeError("apply_spirit: expected [nc, ny, nx]");
    if (ksp.dim(0) != k.nc) throw ShapeError("apply_spirit: coil count mismatch");
    const std::size_t nc = k.nc, ny = ksp.dim(1), nx = ksp.dim(2);
    const long hy = static_cast<long>(k.kh / 2), hx = static_cast<long>(k.kw / 2);

    ComplexArray out = ComplexArray::zeros(ksp.shape());
    for (std::size_t ct = 0; ct < nc; ++ct) {
        cxd* dst = out.data() + (ct * ny) * nx;
        for (std::size_t cs = 0; cs < nc; ++cs)
            for (std::size_t dy = 0; dy < k.kh; ++dy)
                for (std::size_t dx = 0; dx < k.kw; ++dx) {
                    const cxd w = k.weights(ct, cs, dy, dx);
                    if (w == cxd(0.0, 0.0)) continue;
                    const long oy = static_cast<long>(dy) - hy;
                    const long ox = static_cast<long>(dx) - hx;
                    const cxd* src = ksp.data() + (cs * ny) * nx;
                    for (std::size_t r = 0; r < ny; ++r) {
                        const std::size_t rr = detail::wrap_index(static_cast<long>(r) + oy, ny);
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

struct SpiritResult {
    ComplexArray ksp;           // [nc, ny, nx]
    std::size_t iterations = 0; // update passes actually run
    bool converged = false;
    bool degenerate_mask = false; // no acquired lines: input returned unchanged
};

/// Iterative fill-in: x <- data-consistency(apply_spirit(x)). Acquired ky
/// lines are copied from the measurements verbatim on every pass, so they are
/// bit-exact in the result. Stops when the relative update falls below tol.
/// Throws DivergenceError when updates grow by 10x over a 10-iteration span.
inline SpiritResult spirit_recon(const ComplexArray& ksp, const SpiritKernel& kernel,
                                 const SamplingMask& mask, std::size_t max_iters = 100,
                                 double tol = 1e-6) {
    if (ksp.ndim() != 3) throw ShapeError("spirit_recon: expected [nc, ny, nx]");
    if (ksp.dim(0) != kernel.nc) throw ShapeError("spirit_recon: coil count mismatch");
    const std::size_t nc = ksp.dim(0), ny = ksp.dim(1), nx = ksp.dim(2);
    if (mask.ny != ny) throw ShapeError("spirit_recon: mask length does not match ky size");

    SpiritResult res;
    if (mask.acquired_count() == 0) {
        res.ksp = ksp;
        res.degenerate_mask = true;
        return res;
    }

    const ComplexArray data = apply_mask(ksp, mask);
    ComplexArray x = data;
    std::vector<double> deltas;
    deltas.reserve(max_iters);
    for (std::size_t it = 0; it < max_iters; ++it) {
        ComplexArray gx = apply_spirit(kernel, x);
        // Hard data consistency: overwrite acquired rows with the measurements.
        for (std::size_t c = 0; c < nc; ++c)
            for (std::size_t r = 0; r < ny; ++r)
                if (mask.line(r)) {
                    cxd* drow = gx.data() + (c * ny + r) * nx;
                    const cxd* srow = data.data() + (c * ny + r) * nx;
                    for (std::size_t i = 0; i < nx; ++i) drow[i] = srow[i];
                }
        const double xn = norm2(x);
        const double delta = norm2(sub(gx, x)) / (xn > 0.0 ? xn : 1.0);
        x = std::move(gx);
        res.iterations = it + 1;
        deltas.push_back(delta);
        if (delta < tol) {
            res.converged = true;
            break;
        }
        if (deltas.size() > 10 && delta > 10.0 * deltas[deltas.size() - 11])
            throw DivergenceError("spirit_recon: update norm grew 10x over 10 iterations",
                                  static_cast<long>(it));
    }
    res.ksp = std::move(x);
    return res;
}

} // namespace smsrecon

#endif
