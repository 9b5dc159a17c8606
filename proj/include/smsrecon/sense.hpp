#ifndef SMSRECON_SENSE_HPP
#define SMSRECON_SENSE_HPP

// Coil-sensitivity unfolding of uniformly undersampled k-space.
//
// Input k-space is first reduced to the pure comb {ky % accel == 0} so the
// aliasing pattern is exactly periodic. When accel divides ny the zero-filled
// inverse FFT couples each pixel only to its accel fold-over partners:
//
//   z(r) = (1/R) * sum_g phi_g * x(r + g*ny/R),   phi_g = exp(+i*2*pi*c*g/R)
//
// with c = ny/2 (the comb is defined on the stored grid whose DC row is c).
// Those small nc x R systems are solved with a truncated pseudoinverse.
// When accel does not divide ny there is no finite fold-over set, so each
// image column is recovered by a dense least-squares solve against the
// centered 1-D DFT rows actually acquired.

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "smsrecon/acquisition.hpp"
#include "smsrecon/coils.hpp"
#include "smsrecon/errors.hpp"
#include "smsrecon/fft.hpp"
#include "smsrecon/lstsq.hpp"
#include "smsrecon/mask.hpp"
#include "smsrecon/slice_grappa.hpp"
#include "smsrecon/tensor.hpp"

namespace smsrecon {

struct SenseResult {
    ComplexArray image; // [ny, nx]
    RealArray flagged;  // [ny, nx]; 1 where the local system was ill-conditioned
    std::size_t flagged_count = 0;
};

namespace detail {

constexpr double kSenseCondLimit = 1e8;

/// Truncated-pseudoinverse solve of a small dense system; reports whether the
/// condition number exceeded kSenseCondLimit.
inline Eigen::VectorXcd pinv_solve(const CMat& E, const Eigen::VectorXcd& b, bool& ill) {
    Eigen::JacobiSVD<CMat> svd(E, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double smax = s.size() > 0 ? s(0) : 0.0;
    const double smin = s.size() > 0 ? s(s.size() - 1) : 0.0;
    ill = smax == 0.0 || smin < smax / kSenseCondLimit;
    Eigen::VectorXcd u = svd.matrixU().adjoint() * b;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        u(i) = s(i) > 1e-8 * smax ? u(i) / s(i) : cxd(0.0, 0.0);
    return svd.matrixV() * u;
}

} // namespace detail

/// Unfold uniformly undersampled single-slice k-space [nc, ny, nx] into a
/// complex image. Only the comb lines {ky % accel == 0} are used.
inline SenseResult sense_unfold(const ComplexArray& ksp, const CoilSensitivities& maps,
                                std::size_t accel) {
    if (ksp.ndim() != 3) throw ShapeError("sense_unfold: expected [nc, ny, nx]");
    const std::size_t nc = ksp.dim(0), ny = ksp.dim(1), nx = ksp.dim(2);
    if (maps.nc() != nc || maps.ny() != ny || maps.nx() != nx)
        throw ShapeError("sense_unfold: sensitivity map grid mismatch");
    if (accel == 0 || accel > ny) throw ArgumentError("sense_unfold: accel out of range");

    const SamplingMask comb = make_uniform_mask(ny, accel, 0);
    const ComplexArray comb_ksp = apply_mask(ksp, comb);

    SenseResult res;
    res.image = ComplexArray::zeros({ny, nx});
    res.flagged = RealArray::zeros({ny, nx});

    if (accel == 1) {
        res.image = maps.combine(ifft2c(comb_ksp));
        return res;
    }

    if (ny % accel == 0) {
        const std::size_t R = accel, M = ny / R;
        const std::size_t c0 = ny / 2;
        const ComplexArray z = ifft2c(comb_ksp); // [nc, ny, nx], fold-over images
        std::vector<cxd> phi(R);
        for (std::size_t g = 0; g < R; ++g)
            phi[g] = std::polar(1.0 / static_cast<double>(R),
                                2.0 * M_PI * static_cast<double>(c0) * static_cast<double>(g) /
                                    static_cast<double>(R));
        CMat E(nc, R);
        Eigen::VectorXcd b(nc);
        for (std::size_t x = 0; x < nx; ++x)
            for (std::size_t r0 = 0; r0 < M; ++r0) {
                for (std::size_t c = 0; c < nc; ++c) {
                    b(c) = z(c, r0, x);
                    for (std::size_t g = 0; g < R; ++g)
                        E(c, g) = phi[g] * maps.maps(c, r0 + g * M, x);
                }
                bool ill = false;
                const Eigen::VectorXcd u = detail::pinv_solve(E, b, ill);
                for (std::size_t g = 0; g < R; ++g) {
                    res.image(r0 + g * M, x) = u(g);
                    if (ill) res.flagged(r0 + g * M, x) = 1.0;
                }
                if (ill) res.flagged_count += R;
            }
        return res;
    }

    // accel does not divide ny: dense per-column solve in (ky, x) hybrid space.
    const ComplexArray hybrid = ifft1c(comb_ksp); // image along x, k-space along y
    std::vector<std::size_t> lines;
    for (std::size_t r = 0; r < ny; ++r)
        if (comb.line(r)) lines.push_back(r);
    const std::size_t nl = lines.size();
    const double c0 = static_cast<double>(ny / 2);
    const double root = std::sqrt(static_cast<double>(ny));

    CMat A(nc * nl, ny);
    Eigen::VectorXcd b(nc * nl);
    for (std::size_t x = 0; x < nx; ++x) {
        for (std::size_t ci = 0; ci < nc; ++ci)
            for (std::size_t ki = 0; ki < nl; ++ki) {
                const double k = static_cast<double>(lines[ki]);
                b(ci * nl + ki) = hybrid(ci, lines[ki], x);
                for (std::size_t r = 0; r < ny; ++r) {
                    const double ang =
                        -2.0 * M_PI * (k - c0) * (static_cast<double>(r) - c0) / static_cast<double>(ny);
                    A(ci * nl + ki, r) = std::polar(1.0 / root, ang) * maps.maps(ci, r, x);
                }
            }
        Eigen::BDCSVD<CMat> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::VectorXd& s = svd.singularValues();
        const double smax = s.size() > 0 ? s(0) : 0.0;
        const bool ill = smax == 0.0 || s(s.size() - 1) < smax / detail::kSenseCondLimit;
        Eigen::VectorXcd u = svd.matrixU().adjoint() * b;
        for (Eigen::Index i = 0; i < s.size(); ++i)
            u(i) = s(i) > 1e-8 * smax ? u(i) / s(i) : cxd(0.0, 0.0);
        const Eigen::VectorXcd m = svd.matrixV() * u;
        for (std::size_t r = 0; r < ny; ++r) {
            res.image(r, x) = m(r);
            if (ill) {
                res.flagged(r, x) = 1.0;
                ++res.flagged_count;
            }
        }
    }
    return res;
}

/// Slice separation followed by per-slice unfolding: collapsed SMS k-space
/// [nc, ny, nx] -> complex slice images [mb, ny, nx]. The input is reduced to
/// the pure comb before the kernels run, so kernels calibrated with
/// row_stride == spec.accel see exactly the geometry they were fit for.
inline ComplexArray sg_sense_pipeline(const ComplexArray& sms_ksp, const SliceGrappaKernels& kernels,
                                      const std::vector<CoilSensitivities>& maps_per_slice,
                                      const SamplingMask& mask, const AcquisitionSpec& spec) {
    if (sms_ksp.ndim() != 3) throw ShapeError("sg_sense_pipeline: expected [nc, ny, nx]");
    const std::size_t ny = sms_ksp.dim(1), nx = sms_ksp.dim(2);
    if (mask.ny != ny) throw ShapeError("sg_sense_pipeline: mask length mismatch");
    if (maps_per_slice.size() != spec.mb)
        throw ShapeError("sg_sense_pipeline: need one sensitivity set per slice");

    const SamplingMask comb = make_uniform_mask(ny, spec.accel, 0);
    const ComplexArray comb_ksp = apply_mask(sms_ksp, comb);
    const ComplexArray separated = apply_slice_grappa(kernels, comb_ksp);

    ComplexArray out({spec.mb, ny, nx});
    for (std::size_t s = 0; s < spec.mb; ++s) {
        const ComplexArray unshifted = caipi_shift(separated.slice(s), s, spec, /*invert=*/true);
        out.set_slice(s, sense_unfold(unshifted, maps_per_slice[s], spec.accel).image);
    }
    return out;
}

} // namespace smsrecon

#endif
