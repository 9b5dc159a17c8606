#ifndef SMSRECON_SMS_SAMPLER_HPP
#define SMSRECON_SMS_SAMPLER_HPP

// Reverse-diffusion reconstruction of simultaneous multi-slice k-space.
//
// Each slice runs its own predictor-corrector chain in its natural
// (unshifted) frame. Once per step, the slices' denoised estimates are
// combined through the multiband forward model (FOV shift + sum), the
// measured lines are re-imposed (hard data consistency by default), and the
// slice-separation kernels split the result back into per-slice estimates
// that feed the predictors. Initialization separates the measured data with
// stride-matched kernels and fills the in-plane gaps per slice with the
// self-consistency solver.

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "smsrecon/acquisition.hpp"
#include "smsrecon/coils.hpp"
#include "smsrecon/errors.hpp"
#include "smsrecon/fft.hpp"
#include "smsrecon/mask.hpp"
#include "smsrecon/metrics.hpp"
#include "smsrecon/pc_sampler.hpp"
#include "smsrecon/rng.hpp"
#include "smsrecon/schedule.hpp"
#include "smsrecon/score_model.hpp"
#include "smsrecon/slice_grappa.hpp"
#include "smsrecon/spirit.hpp"
#include "smsrecon/tensor.hpp"

namespace smsrecon {

struct SamplerConfig {
    std::size_t n_corrector = 1;
    double snr = 0.16;           // Langevin step-size parameter
    double soft_dc_weight = 1.0; // 1 = hard replacement on acquired lines
    bool corrector_first = true;
    bool dc_include_acs = true; // false: data consistency on the comb lines only
    bool dc_enabled = true;     // ablation switch
    bool entry_noise = true;    // start chains from the t=1 forward marginal
    std::size_t spirit_kh = 5, spirit_kw = 5;
    std::size_t spirit_iters = 50;
    double spirit_tol = 1e-5;
};

struct SmsProblem {
    ComplexArray sms_ksp;       // [nc, ny, nx], measured collapsed k-space
    ComplexArray acs_per_slice; // [mb, nc, acs_rows, nx], per-slice calibration
    SamplingMask mask;
    SliceGrappaKernels kernels; // stride-1 kernels for re-separation of dense data
    std::vector<CoilSensitivities> maps_per_slice;
    AcquisitionSpec spec;
    DiffusionSchedule schedule;
    std::shared_ptr<const ScoreModel> score_model;
    SamplerConfig sampler;

    void validate() const {
        spec.validate();
        if (sms_ksp.ndim() != 3) throw ShapeError("SmsProblem: sms_ksp must be [nc, ny, nx]");
        const std::size_t nc = sms_ksp.dim(0), ny = sms_ksp.dim(1), nx = sms_ksp.dim(2);
        if (acs_per_slice.ndim() != 4 || acs_per_slice.dim(0) != spec.mb ||
            acs_per_slice.dim(1) != nc || acs_per_slice.dim(3) != nx)
            throw ShapeError("SmsProblem: acs_per_slice must be [mb, nc, acs, nx]");
        if (mask.ny != ny) throw ShapeError("SmsProblem: mask length mismatch");
        if (kernels.mb != spec.mb || kernels.nc != nc)
            throw ShapeError("SmsProblem: separation kernels mismatch");
        if (maps_per_slice.size() != spec.mb)
            throw ShapeError("SmsProblem: need one sensitivity set per slice");
        for (const auto& m : maps_per_slice)
            if (m.nc() != nc || m.ny() != ny || m.nx() != nx)
                throw ShapeError("SmsProblem: sensitivity grid mismatch");
        if (schedule.ny != ny || schedule.nx != nx)
            throw ShapeError("SmsProblem: schedule grid mismatch");
        if (!score_model) throw ArgumentError("SmsProblem: score model not set");
        for (std::size_t c = 0; c < nc; ++c)
            for (std::size_t r = 0; r < ny; ++r)
                if (!mask.line(r))
                    for (std::size_t x = 0; x < nx; ++x)
                        if (sms_ksp(c, r, x) != cxd(0.0, 0.0))
                            throw ArgumentError(
                                "SmsProblem: sms_ksp nonzero on a masked-out line");
    }
};

/// Largest odd kernel height whose stride-spaced span fits the calibration rows.
inline std::size_t fit_kernel_height(std::size_t kh, std::size_t stride, std::size_t nacs) {
    while (kh > 1 && (kh - 1) * stride + 1 > nacs) kh -= 2;
    return kh;
}

/// Separate the measured data with stride-matched kernels where the full tap
/// stencil was acquired, take the per-slice calibration rows verbatim, and
/// fill each slice's remaining lines with the self-consistency solver. Output
/// slices are in their natural frame.
inline ComplexArray initialize(const SmsProblem& problem) {
    problem.validate();
    const auto& spec = problem.spec;
    const std::size_t nc = problem.sms_ksp.dim(0);
    const std::size_t ny = problem.sms_ksp.dim(1), nx = problem.sms_ksp.dim(2);
    const std::size_t nacs = problem.acs_per_slice.dim(2);
    const std::size_t kh = fit_kernel_height(problem.kernels.kh, spec.accel, nacs);

    const SliceGrappaKernels init_kernels = calibrate_slice_grappa(
        problem.acs_per_slice, spec, kh, problem.kernels.kw, -1.0, spec.accel);
    const ComplexArray sep = apply_slice_grappa(init_kernels, problem.sms_ksp);

    // A separated line is only trustworthy where every stride-spaced tap row
    // was measured; elsewhere the kernel mixed in zeros. The calibration block
    // is measured per slice, so it is trusted (and spliced in) unconditionally.
    SamplingMask trusted;
    trusted.ny = ny;
    trusted.accel = problem.mask.accel;
    trusted.acs_lines = problem.mask.acs_lines;
    trusted.pattern.assign(ny, 0);
    const long span = static_cast<long>(ny);
    const long hy = static_cast<long>(kh / 2) * static_cast<long>(spec.accel);
    for (std::size_t r = 0; r < ny; ++r) {
        if (!problem.mask.line(r)) continue;
        bool ok = true;
        for (std::size_t dy = 0; dy < kh && ok; ++dy) {
            const long off = static_cast<long>(dy) * static_cast<long>(spec.accel) - hy;
            const long tap = ((static_cast<long>(r) + off) % span + span) % span;
            ok = problem.mask.line(static_cast<std::size_t>(tap));
        }
        if (ok) trusted.pattern[r] = 1;
    }
    const std::size_t acs_start = ny / 2 - nacs / 2;
    for (std::size_t r = acs_start; r < acs_start + nacs && r < ny; ++r) trusted.pattern[r] = 1;

    ComplexArray out(sep.shape());
    for (std::size_t s = 0; s < spec.mb; ++s) {
        ComplexArray slice_ksp = caipi_shift(sep.slice(s), s, spec, /*invert=*/true);
        for (std::size_t c = 0; c < nc; ++c)
            for (std::size_t r = 0; r < ny; ++r) {
                if (trusted.line(r)) continue;
                cxd* row = slice_ksp.data() + (c * ny + r) * nx;
                std::fill(row, row + nx, cxd{});
            }
        for (std::size_t c = 0; c < nc; ++c)
            for (std::size_t r = 0; r < nacs && acs_start + r < ny; ++r)
                for (std::size_t x = 0; x < nx; ++x)
                    slice_ksp(c, acs_start + r, x) = problem.acs_per_slice(s, c, r, x);
        const SpiritKernel spk = calibrate_spirit(problem.acs_per_slice.slice(s),
                                                  problem.sampler.spirit_kh,
                                                  problem.sampler.spirit_kw);
        const SpiritResult filled = spirit_recon(slice_ksp, spk, trusted,
                                                 problem.sampler.spirit_iters,
                                                 problem.sampler.spirit_tol);
        out.set_slice(s, filled.ksp);
    }
    return out;
}

struct DataConsistencyResult {
    ComplexArray separated; // [mb, nc, ny, nx], per-slice estimates, natural frame
    ComplexArray dc_sms;    // [nc, ny, nx], the collapsed data after line replacement
};

/// Combine per-slice clean-data estimates through the multiband model, impose
/// the measured lines, and separate again.
inline DataConsistencyResult data_consistency_sms_full(const ComplexArray& z0_slices,
                                                       const SmsProblem& problem) {
    if (z0_slices.ndim() != 4) throw ShapeError("data_consistency_sms: expected [mb, nc, ny, nx]");
    if (z0_slices.dim(0) != problem.spec.mb || z0_slices.dim(1) != problem.sms_ksp.dim(0) ||
        z0_slices.dim(2) != problem.sms_ksp.dim(1) || z0_slices.dim(3) != problem.sms_ksp.dim(2))
        throw ShapeError("data_consistency_sms: estimate shape does not match problem");

    const auto& spec = problem.spec;
    const std::size_t nc = z0_slices.dim(1), ny = z0_slices.dim(2), nx = z0_slices.dim(3);

    DataConsistencyResult res;
    res.dc_sms = collapse_sms(z0_slices, spec);
    const double w = problem.sampler.soft_dc_weight;
    for (std::size_t r = 0; r < ny; ++r) {
        const bool on_comb = r % spec.accel == 0;
        const bool acquired = problem.sampler.dc_include_acs ? problem.mask.line(r) : on_comb;
        if (!acquired) continue;
        for (std::size_t c = 0; c < nc; ++c) {
            cxd* row = res.dc_sms.data() + (c * ny + r) * nx;
            const cxd* meas = problem.sms_ksp.data() + (c * ny + r) * nx;
            if (w == 1.0)
                for (std::size_t x = 0; x < nx; ++x) row[x] = meas[x];
            else
                for (std::size_t x = 0; x < nx; ++x) row[x] = w * meas[x] + (1.0 - w) * row[x];
        }
    }

    const ComplexArray sep = apply_slice_grappa(problem.kernels, res.dc_sms);
    res.separated = ComplexArray(sep.shape());
    for (std::size_t s = 0; s < spec.mb; ++s)
        res.separated.set_slice(s, caipi_shift(sep.slice(s), s, spec, /*invert=*/true));
    return res;
}

inline ComplexArray data_consistency_sms(const ComplexArray& z0_slices, const SmsProblem& problem) {
    return data_consistency_sms_full(z0_slices, problem).separated;
}

/// Full reverse-diffusion SMS reconstruction. Returns complex slice images
/// [mb, ny, nx]. Deterministic for a fixed problem and seed. With data
/// consistency enabled the output is built from the consistency-passed
/// estimate, so measured k-space lines are honored exactly.
inline ComplexArray sms_reconstruct(const SmsProblem& problem, std::size_t n_corrector,
                                    std::uint64_t seed) {
    const auto& spec = problem.spec;
    const auto& sched = problem.schedule;
    const auto& cfg = problem.sampler;
    const std::size_t mb = spec.mb, ny = sched.ny, nx = sched.nx;
    const ScoreModel& model = *problem.score_model;

    const ComplexArray init = initialize(problem);

    std::vector<Rng> rngs;
    rngs.reserve(mb);
    for (std::size_t s = 0; s < mb; ++s) rngs.emplace_back(mix64(seed, s));

    // Entry state: the t=1 forward marginal around the initialization.
    const RealArray a1 = sched.atten(sched.n_steps);
    const double s1 = sched.sigma(sched.n_steps);
    std::vector<ComplexArray> z(mb);
    for (std::size_t s = 0; s < mb; ++s) {
        z[s] = hadamard_last2(init.slice(s), a1);
        if (cfg.entry_noise) {
            ComplexArray n = coil_project(rngs[s].cnormal_array(z[s].shape()),
                                          problem.maps_per_slice[s]);
            for (std::size_t p = 0; p < z[s].size(); ++p) z[s][p] += s1 * n[p];
        }
    }

    std::vector<Projector> projectors;
    projectors.reserve(mb);
    for (std::size_t s = 0; s < mb; ++s)
        projectors.push_back(make_coil_projector(problem.maps_per_slice[s]));

    ComplexArray zhat0({mb, problem.sms_ksp.dim(0), ny, nx});
    for (std::size_t step = sched.n_steps; step-- > 0;) {
        const double t_hi = sched.time(step + 1), t_lo = sched.time(step);
        if (cfg.corrector_first)
            for (std::size_t s = 0; s < mb; ++s)
                for (std::size_t c = 0; c < n_corrector; ++c)
                    z[s] = corrector_core(z[s],
                                          model.score(z[s], t_hi, problem.maps_per_slice[s]),
                                          projectors[s], cfg.snr, &rngs[s]);

        for (std::size_t s = 0; s < mb; ++s)
            zhat0.set_slice(s, model.denoise(z[s], t_hi, problem.maps_per_slice[s]));
        if (cfg.dc_enabled) zhat0 = data_consistency_sms(zhat0, problem);

        for (std::size_t s = 0; s < mb; ++s) {
            const ComplexArray sc = model.score(z[s], t_hi, problem.maps_per_slice[s]);
            try {
                z[s] = predictor_core(z[s], step, sched, zhat0.slice(s), sc, projectors[s],
                                      &rngs[s]);
            } catch (const NumericalError&) {
                throw NumericalError("sms_reconstruct: non-finite iterate",
                                     static_cast<long>(step));
            }
        }

        if (!cfg.corrector_first)
            for (std::size_t s = 0; s < mb; ++s)
                for (std::size_t c = 0; c < n_corrector; ++c)
                    z[s] = corrector_core(z[s],
                                          model.score(z[s], t_lo, problem.maps_per_slice[s]),
                                          projectors[s], cfg.snr, &rngs[s]);
    }

    // Final clean-data estimate, then one more consistency pass so measured
    // k-space lines enter the output exactly.
    for (std::size_t s = 0; s < mb; ++s)
        zhat0.set_slice(s, model.denoise(z[s], sched.time(0), problem.maps_per_slice[s]));
    if (cfg.dc_enabled) zhat0 = data_consistency_sms(zhat0, problem);

    ComplexArray out({mb, ny, nx});
    for (std::size_t s = 0; s < mb; ++s)
        out.set_slice(s, problem.maps_per_slice[s].combine(ifft2c(zhat0.slice(s))));
    return out;
}

struct MetricsRow {
    std::string method;
    std::string slice; // "0", "1", ... or "mean"
    double nmse = 0.0;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

/// Per-slice and mean quality metrics of a reconstruction against the truth.
inline std::vector<MetricsRow> recon_report(const std::string& method, const ComplexArray& truth,
                                            const ComplexArray& recon) {
    check_same_shape(truth, recon, "recon_report");
    if (truth.ndim() != 3) throw ShapeError("recon_report: expected [mb, ny, nx]");
    std::vector<MetricsRow> rows;
    double sn = 0.0, sp = 0.0, ss = 0.0;
    const std::size_t mb = truth.dim(0);
    for (std::size_t s = 0; s < mb; ++s) {
        const RealArray t_mag = abs(truth.slice(s));
        const RealArray r_mag = abs(recon.slice(s));
        MetricsRow row;
        row.method = method;
        row.slice = std::to_string(s);
        row.nmse = nmse(t_mag, r_mag);
        row.psnr_db = psnr(t_mag, r_mag);
        row.ssim = ssim(t_mag, r_mag);
        sn += row.nmse;
        sp += row.psnr_db;
        ss += row.ssim;
        rows.push_back(row);
    }
    MetricsRow mean_row;
    mean_row.method = method;
    mean_row.slice = "mean";
    mean_row.nmse = sn / static_cast<double>(mb);
    mean_row.psnr_db = sp / static_cast<double>(mb);
    mean_row.ssim = ss / static_cast<double>(mb);
    rows.push_back(mean_row);
    return rows;
}

} // namespace smsrecon

#endif
