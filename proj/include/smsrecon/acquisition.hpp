#ifndef SMSRECON_ACQUISITION_HPP
#define SMSRECON_ACQUISITION_HPP

#include "smsrecon/coils.hpp"
#include "smsrecon/fft.hpp"
#include "smsrecon/mask.hpp"
#include "smsrecon/rng.hpp"
#include "smsrecon/tensor.hpp"

namespace smsrecon {

/// Multiband acquisition parameters.
struct AcquisitionSpec {
    std::size_t mb = 3;          // simultaneously excited slices
    double caipi_fraction = 2.0 / 3.0; // FOV shift per slice step
    std::size_t accel = 3;       // in-plane undersampling factor
    std::size_t acs_lines = 32;
    double noise_sigma = 0.0;    // k-space complex noise std
    std::uint64_t seed = 0;

    void validate() const {
        if (mb < 1) throw ArgumentError("AcquisitionSpec: mb must be >= 1");
        if (caipi_fraction < 0.0 || caipi_fraction >= 1.0)
            throw ArgumentError("AcquisitionSpec: caipi_fraction must be in [0, 1)");
        if (noise_sigma < 0.0) throw ArgumentError("AcquisitionSpec: noise_sigma must be >= 0");
    }
};

/// Phase applied to ky line `row` (global index on the centered grid) for slice `slice_idx`.
inline cxd caipi_phase(const AcquisitionSpec& spec, std::size_t slice_idx, std::size_t row,
                       std::size_t ny, bool invert = false) {
    const double ky = static_cast<double>(row) - static_cast<double>(ny / 2);
    const double ang = 2.0 * M_PI * ky * (static_cast<double>(slice_idx) * spec.caipi_fraction);
    return std::polar(1.0, invert ? ang : -ang);
}

/// FOV shift of slice `slice_idx` as a k-space phase ramp along ky. Equivalent
/// to a cyclic image shift of slice_idx*caipi_fraction*ny rows; invert undoes it.
inline ComplexArray caipi_shift(const ComplexArray& ksp_slice, std::size_t slice_idx,
                                const AcquisitionSpec& spec, bool invert = false) {
    if (ksp_slice.ndim() < 2) throw ShapeError("caipi_shift: need >= 2 dims");
    if (slice_idx >= spec.mb)
        throw ArgumentError("caipi_shift: slice_idx " + std::to_string(slice_idx) + " out of range for mb=" +
                            std::to_string(spec.mb));
    const std::size_t ny = ksp_slice.rows(), nx = ksp_slice.cols();
    ComplexArray out = ksp_slice;
    for (std::size_t p = 0; p < out.size() / (ny * nx); ++p)
        for (std::size_t r = 0; r < ny; ++r) {
            const cxd ph = caipi_phase(spec, slice_idx, r, ny, invert);
            cxd* row = out.data() + (p * ny + r) * nx;
            for (std::size_t x = 0; x < nx; ++x) row[x] *= ph;
        }
    return out;
}

/// Multiband collapse: shift each slice by its CAIPIRINHA ramp and sum.
inline ComplexArray collapse_sms(const ComplexArray& slices, const AcquisitionSpec& spec) {
    if (slices.ndim() != 4) throw ShapeError("collapse_sms: expected [mb, nc, ny, nx]");
    if (slices.dim(0) != spec.mb)
        throw ShapeError("collapse_sms: slice count " + std::to_string(slices.dim(0)) +
                         " does not match spec.mb=" + std::to_string(spec.mb));
    ComplexArray out({slices.dim(1), slices.dim(2), slices.dim(3)});
    for (std::size_t s = 0; s < spec.mb; ++s) out = add(out, caipi_shift(slices.slice(s), s, spec));
    return out;
}

/// Simulated acquisition outputs.
struct Acquisition {
    ComplexArray sms_ksp;       // [nc, ny, nx], masked collapsed k-space
    ComplexArray acs_per_slice; // [mb, nc, acs_lines, nx], unshifted calibration scans
    SamplingMask mask;
};

/// Forward SMS acquisition: per-slice coil k-spaces, CAIPIRINHA collapse,
/// receiver noise, in-plane undersampling. Calibration ACS blocks are the
/// fully-sampled central rows of each single-slice k-space.
inline Acquisition acquire(const ComplexArray& slices_truth, const CoilSensitivities& maps,
                           const AcquisitionSpec& spec) {
    spec.validate();
    if (slices_truth.ndim() != 3) throw ShapeError("acquire: expected truth [mb, ny, nx]");
    if (slices_truth.dim(0) != spec.mb) throw ShapeError("acquire: slice count does not match spec.mb");
    const std::size_t ny = slices_truth.dim(1), nx = slices_truth.dim(2), nc = maps.nc();
    if (maps.ny() != ny || maps.nx() != nx) throw ShapeError("acquire: maps grid mismatch");
    if (spec.acs_lines < 1) throw ArgumentError("acquire: acs_lines must be >= 1");
    if (spec.acs_lines > ny) throw ArgumentError("acquire: acs_lines exceeds ny");

    ComplexArray slice_ksp({spec.mb, nc, ny, nx});
    for (std::size_t s = 0; s < spec.mb; ++s)
        slice_ksp.set_slice(s, fft2c(maps.expand(slices_truth.slice(s))));

    ComplexArray sms = collapse_sms(slice_ksp, spec);
    if (spec.noise_sigma > 0.0) {
        Rng rng(mix64(spec.seed, 0xACC0));
        for (std::size_t i = 0; i < sms.size(); ++i) sms[i] += spec.noise_sigma * rng.cnormal();
    }
    Acquisition out;
    out.mask = make_uniform_mask(ny, spec.accel, spec.acs_lines);
    out.sms_ksp = apply_mask(sms, out.mask);

    const std::size_t start = out.mask.acs_start();
    out.acs_per_slice = ComplexArray({spec.mb, nc, spec.acs_lines, nx});
    for (std::size_t s = 0; s < spec.mb; ++s)
        for (std::size_t c = 0; c < nc; ++c)
            for (std::size_t r = 0; r < spec.acs_lines; ++r)
                for (std::size_t x = 0; x < nx; ++x)
                    out.acs_per_slice(s, c, r, x) = slice_ksp(s, c, start + r, x);
    return out;
}

} // namespace smsrecon

#endif
