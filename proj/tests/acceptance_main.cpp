// Release gate: one self-contained check per shipping criterion, each printed
// as a single pass/fail line with its measured margins. The binary exits 0
// only when every criterion passes. Tolerances are pinned here, next to the
// check they govern, so a regression cannot be hidden by config drift.

#include <cmath>
#include <complex>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <smsrecon/smsrecon.hpp>

#include "oracles.hpp"

using namespace smsrecon;
namespace fs = std::filesystem;
using clk = std::chrono::steady_clock;
using oracles::rel_err;

namespace {

double secs(clk::time_point a, clk::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

std::string strf(const char* fmt, ...) {
    char buf[1024];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, ap);
    va_end(ap);
    return buf;
}

struct Outcome {
    bool ok = false;
    std::string detail;
};

bool run_criterion(std::size_t n, const char* label, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
        o = fn();
    } catch (const std::exception& e) {
        o = {false, strf("exception: %s", e.what())};
    }
    std::printf("criterion %2zu [%s]: %s  (%s)\n", n, label, o.ok ? "PASS" : "FAIL",
                o.detail.c_str());
    std::fflush(stdout);
    return o.ok;
}

AcquisitionSpec make_spec(std::size_t mb, double caipi, std::size_t accel, std::size_t acs,
                          std::uint64_t seed = 0) {
    AcquisitionSpec s;
    s.mb = mb;
    s.caipi_fraction = caipi;
    s.accel = accel;
    s.acs_lines = acs;
    s.noise_sigma = 0.0;
    s.seed = seed;
    return s;
}

/// Column index of tap (cs, dy, dx) in the dense calibration matrix layout.
std::size_t tap_col(std::size_t cs, std::size_t dy, std::size_t dx, std::size_t kh,
                    std::size_t kw) {
    return (cs * kh + dy) * kw + dx;
}

// ---------------------------------------------------------------------------
// 1. Centered FFT: roundtrip and energy preservation on random sizes up to
//    64x64, plus agreement with a direct-summation DFT on an 8x8 grid.
// ---------------------------------------------------------------------------
Outcome fft_invariants() {
    const double tol = 1e-10;
    const double budget_s = 5.0;
    const auto t0 = clk::now();

    Rng rng(2026);
    double worst_rt = 0.0, worst_energy = 0.0;
    for (int i = 0; i < 200; ++i) {
        const std::size_t ny = 1 + rng.bits() % 64, nx = 1 + rng.bits() % 64;
        const ComplexArray x = rng.cnormal_array({ny, nx});
        const ComplexArray k = fft2c(x);
        worst_rt = std::max(worst_rt, rel_err(x, ifft2c(k)));
        const double ex = norm2(x), ek = norm2(k);
        worst_energy = std::max(worst_energy, std::abs(ek * ek - ex * ex) / (ex * ex));
    }

    Rng r8(99);
    const ComplexArray x8 = r8.cnormal_array({8, 8});
    const double fwd = rel_err(oracles::fft2c_direct(x8), fft2c(x8));
    const double inv = rel_err(oracles::ifft2c_direct(x8), ifft2c(x8));

    const double el = secs(t0, clk::now());
    const bool ok =
        worst_rt <= tol && worst_energy <= tol && fwd <= tol && inv <= tol && el < budget_s;
    return {ok, strf("200 arrays <=64x64: roundtrip %.2e, energy %.2e; 8x8 oracle %.2e/%.2e; "
                     "%.2f s (tol %.0e, budget %.0f s)",
                     worst_rt, worst_energy, fwd, inv, el, tol, budget_s)};
}

// ---------------------------------------------------------------------------
// 2. The 2/3-FOV phase ramp applied to slice s of a height divisible by 3
//    equals a cyclic image shift by s*2*ny/3 rows.
// ---------------------------------------------------------------------------
Outcome caipi_ramp_equals_image_shift() {
    const double tol = 1e-10;
    Rng rng(2027);
    double worst = 0.0;
    for (std::size_t ny : {12u, 24u, 48u}) {
        const auto spec = make_spec(3, 2.0 / 3.0, 1, 4);
        const ComplexArray img = rng.cnormal_array({ny, 16});
        for (std::size_t s = 0; s < 3; ++s) {
            const ComplexArray sh = caipi_shift(fft2c(img), s, spec);
            const long d = static_cast<long>(s * (2 * ny / 3));
            worst = std::max(worst, rel_err(oracles::roll_rows(img, d), ifft2c(sh)));
        }
    }
    return {worst <= tol, strf("ny in {12,24,48}, slices 0..2: worst %.2e (tol %.0e)", worst, tol)};
}

// ---------------------------------------------------------------------------
// 3. Kernel fits agree with dense normal-equations solves: the slice
//    separation fit on mb=3, nc=4, 16x16 calibration with a 3x3 kernel, and
//    the self-consistency fit with its center tap pinned to zero.
// ---------------------------------------------------------------------------
Outcome calibration_matches_dense_solves() {
    const double tol = 1e-8;
    const double budget_s = 10.0;
    const auto t0 = clk::now();

    const std::size_t mb = 3, nc = 4, nacs = 16, nx = 16, kh = 3, kw = 3;
    const double lambda = 1e-6;
    const std::size_t hy = kh / 2, hx = kw / 2;
    const std::size_t n_rows = (nacs - kh + 1) * (nx - kw + 1);

    double worst_sep = 0.0;
    {
        const auto spec = make_spec(mb, 2.0 / 3.0, 1, nacs);
        Rng rng(301);
        const ComplexArray acs = rng.cnormal_array({mb, nc, nacs, nx});
        const SliceGrappaKernels k = calibrate_slice_grappa(acs, spec, kh, kw, lambda);

        std::vector<ComplexArray> shifted;
        for (std::size_t s = 0; s < mb; ++s)
            shifted.push_back(caipi_shift(acs.slice(s), s, spec));
        ComplexArray collapsed = shifted[0];
        for (std::size_t s = 1; s < mb; ++s) collapsed = add(collapsed, shifted[s]);

        Eigen::MatrixXcd A(n_rows, nc * kh * kw), B(n_rows, mb * nc);
        std::size_t row = 0;
        for (std::size_t c = hx; c + hx < nx; ++c)
            for (std::size_t r = hy; r + hy < nacs; ++r, ++row) {
                for (std::size_t cs = 0; cs < nc; ++cs)
                    for (std::size_t dy = 0; dy < kh; ++dy)
                        for (std::size_t dx = 0; dx < kw; ++dx)
                            A(row, tap_col(cs, dy, dx, kh, kw)) =
                                collapsed(cs, r - hy + dy, c - hx + dx);
                for (std::size_t s = 0; s < mb; ++s)
                    for (std::size_t ct = 0; ct < nc; ++ct)
                        B(row, s * nc + ct) = shifted[s](ct, r, c);
            }
        const Eigen::MatrixXcd X = oracles::normal_eq_solve(A, B, lambda);
        for (std::size_t s = 0; s < mb; ++s)
            for (std::size_t ct = 0; ct < nc; ++ct) {
                Eigen::VectorXcd got(nc * kh * kw);
                for (std::size_t cs = 0; cs < nc; ++cs)
                    for (std::size_t dy = 0; dy < kh; ++dy)
                        for (std::size_t dx = 0; dx < kw; ++dx)
                            got(tap_col(cs, dy, dx, kh, kw)) = k.weights(s, ct, cs, dy, dx);
                const Eigen::VectorXcd want = X.col(s * nc + ct);
                worst_sep = std::max(worst_sep, (got - want).norm() / want.norm());
            }
    }

    double worst_self = 0.0;
    {
        Rng rng(302);
        const ComplexArray acs = rng.cnormal_array({nc, nacs, nx});
        const SpiritKernel k = calibrate_spirit(acs, kh, kw, lambda);
        const std::size_t n_cols = nc * kh * kw;

        Eigen::MatrixXcd A(n_rows, n_cols), B(n_rows, nc);
        std::size_t row = 0;
        for (std::size_t c = hx; c + hx < nx; ++c)
            for (std::size_t r = hy; r + hy < nacs; ++r, ++row) {
                for (std::size_t cs = 0; cs < nc; ++cs)
                    for (std::size_t dy = 0; dy < kh; ++dy)
                        for (std::size_t dx = 0; dx < kw; ++dx)
                            A(row, tap_col(cs, dy, dx, kh, kw)) =
                                acs(cs, r - hy + dy, c - hx + dx);
                for (std::size_t ct = 0; ct < nc; ++ct) B(row, ct) = acs(ct, r, c);
            }
        for (std::size_t ct = 0; ct < nc; ++ct) {
            const std::size_t self = tap_col(ct, hy, hx, kh, kw);
            Eigen::MatrixXcd At(n_rows, n_cols - 1);
            At << A.leftCols(self), A.rightCols(n_cols - 1 - self);
            const Eigen::MatrixXcd w = oracles::normal_eq_solve(At, B.col(ct), lambda);

            Eigen::VectorXcd got(n_cols - 1);
            std::size_t col = 0;
            for (std::size_t cs = 0; cs < nc; ++cs)
                for (std::size_t dy = 0; dy < kh; ++dy)
                    for (std::size_t dx = 0; dx < kw; ++dx) {
                        const std::size_t full = tap_col(cs, dy, dx, kh, kw);
                        if (full == self) continue;
                        got(col++) = k.weights(ct, cs, dy, dx);
                    }
            worst_self = std::max(worst_self, (got - w.col(0)).norm() / w.norm());
        }
    }

    const double el = secs(t0, clk::now());
    const bool ok = worst_sep <= tol && worst_self <= tol && el < budget_s;
    return {ok, strf("slice-separation fit %.2e, self-consistency fit %.2e; %.2f s "
                     "(tol %.0e, budget %.0f s)",
                     worst_sep, worst_self, el, tol, budget_s)};
}

// ---------------------------------------------------------------------------
// 4. Sensitivity unfolding with exact maps on noiseless twofold-undersampled
//    data reproduces the image to solver precision.
// ---------------------------------------------------------------------------
Outcome sense_exactness() {
    const double tol = 1e-10;
    const std::size_t ny = 32, nx = 32, nc = 4;
    const auto spec = make_spec(1, 0.0, 2, 8, 9);
    const ComplexArray truth = make_phantom(ny, nx, 1, 9);
    const CoilSensitivities maps = simulate_coils(ny, nx, nc, 9);
    const Acquisition acq = acquire(truth, maps, spec);

    const SenseResult res = sense_unfold(acq.sms_ksp, maps, 2);
    const double e = nmse(abs(truth.slice(0)), abs(res.image));
    return {res.flagged_count == 0 && e < tol,
            strf("accel 2, nc 4, exact maps: image nmse %.2e (tol %.0e), %zu flagged pixels", e,
                 tol, res.flagged_count)};
}

// ---------------------------------------------------------------------------
// 5. Self-consistency reconstruction keeps acquired lines bit-exact and
//    recovers a noiseless twofold-undersampled scan within 100 iterations.
// ---------------------------------------------------------------------------
Outcome spirit_consistency_and_recovery() {
    const double tol_nmse = 1e-3;
    const std::size_t max_iters = 100;
    const std::size_t ny = 32, nx = 32, nc = 4, acs = 16;
    const auto spec = make_spec(1, 0.0, 2, acs, 21);
    const ComplexArray truth = make_phantom(ny, nx, 1, 21);
    const CoilSensitivities maps = simulate_coils(ny, nx, nc, 21);
    const ComplexArray full_ksp = fft2c(maps.expand(truth.slice(0)));
    const Acquisition acq = acquire(truth, maps, spec);

    const SpiritKernel k = calibrate_spirit(acq.acs_per_slice.slice(0), 5, 5);
    const SpiritResult res = spirit_recon(acq.sms_ksp, k, acq.mask, max_iters, 1e-6);

    std::size_t mismatches = 0;
    for (std::size_t c = 0; c < nc; ++c)
        for (std::size_t r = 0; r < ny; ++r)
            if (acq.mask.line(r))
                for (std::size_t x = 0; x < nx; ++x)
                    if (res.ksp(c, r, x) != acq.sms_ksp(c, r, x)) ++mismatches;
    const double e = nmse(abs(ifft2c(full_ksp)), abs(ifft2c(res.ksp)));
    const bool ok = mismatches == 0 && res.iterations <= max_iters && e < tol_nmse;
    return {ok, strf("%zu acquired samples differ (want 0); nmse %.2e (tol %.0e) in %zu iters "
                     "(cap %zu)",
                     mismatches, e, tol_nmse, res.iterations, max_iters)};
}

// ---------------------------------------------------------------------------
// 6. Gaussian closure: with a closed-form Gaussian score on an 8x8 single-coil
//    grid, the reverse chain's samples reproduce the prior mean and variance.
// ---------------------------------------------------------------------------
Outcome gaussian_closure() {
    const double tol_mean = 0.05, tol_var = 0.15;
    const double budget_s = 120.0;
    const auto t0 = clk::now();

    const std::size_t ny = 8, nx = 8, n_chains = 500;
    const double var = 0.25;
    const DiffusionSchedule sched = make_schedule(ny, nx, 200, 0.01, 1.0, 0.125);
    const CoilSensitivities maps(ComplexArray::ones({1, ny, nx}));
    Rng mrng(41);
    const ComplexArray mean = mrng.cnormal_array({1, ny, nx});
    const auto model = analytic_gaussian_score(mean, var, sched);

    ComplexArray acc = ComplexArray::zeros(mean.shape());
    std::vector<ComplexArray> finals;
    finals.reserve(n_chains);
    for (std::size_t m = 0; m < n_chains; ++m) {
        Rng rng(mix64(7000, m));
        ComplexArray z0 = mean;
        const ComplexArray n = rng.cnormal_array(mean.shape());
        for (std::size_t i = 0; i < z0.size(); ++i) z0[i] += std::sqrt(var) * n[i];
        const ComplexArray z1 = forward_perturb(z0, 1.0, sched, maps, &rng);
        ComplexArray zf = run_reverse_chain(z1, sched, *model, maps, 1, 0.16, true, &rng);
        for (std::size_t i = 0; i < zf.size(); ++i) acc[i] += zf[i];
        finals.push_back(std::move(zf));
    }
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] /= static_cast<double>(n_chains);

    const double mean_err = rel_err(mean, acc);
    double dev2 = 0.0;
    for (const auto& zf : finals)
        for (std::size_t i = 0; i < zf.size(); ++i) dev2 += std::norm(zf[i] - acc[i]);
    const double emp_var = dev2 / static_cast<double>(n_chains * ny * nx);
    const double var_err = std::abs(emp_var - var) / var;

    const double el = secs(t0, clk::now());
    const bool ok = mean_err <= tol_mean && var_err <= tol_var && el < budget_s;
    return {ok, strf("%zu chains: mean err %.3f (tol %.2f), var %.4f vs %.2f -> err %.3f "
                     "(tol %.2f); %.1f s (budget %.0f s)",
                     n_chains, mean_err, tol_mean, emp_var, var, var_err, tol_var, el, budget_s)};
}

// ---------------------------------------------------------------------------
// 7. The training loss gradient matches central finite differences on a
//    three-parameter linear denoiser.
// ---------------------------------------------------------------------------

/// xhat = p0*u + (p1 + i*p2)*t*u: small enough to difference by hand, rich
/// enough to exercise both real and imaginary gradient paths.
class LinearDenoiser final : public ParamDenoiser {
  public:
    LinearDenoiser(double a, double b, double c) {
        params_ = {a, b, c};
        grads_.assign(3, 0.0);
    }

    ComplexArray forward(const ComplexArray& u, double t) override {
        u_ = u;
        t_ = t;
        ComplexArray out(u.shape());
        const cxd m = params_[0] + cxd(params_[1], params_[2]) * t;
        for (std::size_t i = 0; i < u.size(); ++i) out[i] = m * u[i];
        return out;
    }

    void backward(const ComplexArray& c) override {
        for (std::size_t i = 0; i < c.size(); ++i) {
            grads_[0] += std::real(std::conj(c[i]) * u_[i]);
            grads_[1] += std::real(std::conj(c[i]) * (t_ * u_[i]));
            grads_[2] += std::real(std::conj(c[i]) * (cxd(0.0, 1.0) * t_ * u_[i]));
        }
    }

  private:
    ComplexArray u_;
    double t_ = 0.0;
};

Outcome training_gradient_check() {
    const double tol = 1e-4;
    const std::size_t nc = 2, ny = 8, nx = 8;
    const double t = 0.37;
    const DiffusionSchedule sched = make_schedule(ny, nx, 10, 0.05, 1.0, 0.15);
    const CoilSensitivities maps = simulate_coils(ny, nx, nc, 51);
    Rng rng(52);
    const ComplexArray z0 = coil_project(rng.cnormal_array({nc, ny, nx}), maps);
    const ComplexArray z_t = forward_perturb(z0, t, sched, maps, &rng);

    LinearDenoiser net(0.8, -0.2, 0.35);
    net.zero_grads();
    score_matching_loss(net, z0, z_t, t, sched, maps, /*with_grad=*/true);
    const std::vector<double> analytic = net.grads();

    const auto eval = [&]() {
        return score_matching_loss(net, z0, z_t, t, sched, maps, /*with_grad=*/false);
    };
    const std::vector<double> fd = oracles::fd_gradient(net.params(), eval, 1e-6);
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i)
        worst = std::max(worst,
                         std::abs(analytic[i] - fd[i]) / std::max(1.0, std::abs(fd[i])));
    return {worst <= tol, strf("3-parameter denoiser: worst gradient error %.2e (tol %.0e)",
                               worst, tol)};
}

// ---------------------------------------------------------------------------
// 8 & 9. Directional quality on one fixed scene: 64x64, 8 coils, 3 slices,
// 2/3-FOV shift, 16 calibration lines, noiseless, with a small score model
// trained on 50 phantom slices seen through the same coils. The sampler must
// beat the classical baseline at accel 3 and 4 and degrade more gracefully,
// and its quality must be monotone across accel 3..8.
// ---------------------------------------------------------------------------
struct SweepData {
    std::vector<double> base_psnr, prop_psnr, prop_nmse; // indexed accel-3
    double train_s = 0.0, c8_s = 0.0;
    double holdout_first = 0.0, holdout_last = 0.0;
};

SweepData run_fixed_scene_sweep() {
    const std::size_t ny = 64, nx = 64, mb = 3, nc = 8, acs = 16;
    const std::uint64_t seed = 1234;
    const auto t0 = clk::now();

    const ComplexArray truth = make_phantom(ny, nx, mb, mix64(seed, 1));
    const CoilSensitivities maps = simulate_coils(ny, nx, nc, seed);
    const std::vector<CoilSensitivities> maps_vec(mb, maps);

    const ComplexArray train_slices = make_phantom(ny, nx, 50, mix64(seed, 2));
    std::vector<ComplexArray> dataset;
    std::vector<CoilSensitivities> maps_per_item;
    for (std::size_t i = 0; i < 50; ++i) {
        dataset.push_back(fft2c(maps.expand(train_slices.slice(i))));
        maps_per_item.push_back(maps);
    }
    const DiffusionSchedule sched = make_schedule(ny, nx, 100, 0.01, 1.0, 0.125);
    TrainConfig tc;
    tc.epochs = 20;
    tc.steps_per_epoch = 0;
    tc.lr = 1e-5;
    tc.momentum = 0.9;
    tc.holdout_probes = 8;
    tc.seed = seed;
    const TrainOutcome trained = train_score(dataset, maps_per_item, sched, tc);

    SweepData sw;
    sw.train_s = secs(t0, clk::now());
    sw.holdout_first = trained.report.initial_holdout_loss;
    sw.holdout_last = trained.report.final_holdout_loss;

    for (std::size_t accel = 3; accel <= 8; ++accel) {
        const auto spec = make_spec(mb, 2.0 / 3.0, accel, acs, seed);
        const Acquisition acq = acquire(truth, maps, spec);

        const std::size_t kh_b = fit_kernel_height(5, accel, acs);
        const SliceGrappaKernels kern_b =
            calibrate_slice_grappa(acq.acs_per_slice, spec, kh_b, 5, -1.0, accel);
        const ComplexArray base = sg_sense_pipeline(acq.sms_ksp, kern_b, maps_vec, acq.mask, spec);
        sw.base_psnr.push_back(recon_report("base", truth, base).back().psnr_db);

        SmsProblem p;
        p.sms_ksp = acq.sms_ksp;
        p.acs_per_slice = acq.acs_per_slice;
        p.mask = acq.mask;
        p.kernels = calibrate_slice_grappa(acq.acs_per_slice, spec, 5, 5);
        p.maps_per_slice = maps_vec;
        p.spec = spec;
        p.schedule = sched;
        p.score_model = trained.model;
        p.sampler = SamplerConfig{};
        const ComplexArray prop = sms_reconstruct(p, p.sampler.n_corrector, seed);
        const auto row = recon_report("prop", truth, prop).back();
        sw.prop_psnr.push_back(row.psnr_db);
        sw.prop_nmse.push_back(row.nmse);

        if (accel == 4) sw.c8_s = secs(t0, clk::now());
    }
    return sw;
}

Outcome sampler_beats_baseline(const SweepData& sw) {
    const double budget_s = 900.0;
    const double b3 = sw.base_psnr[0], b4 = sw.base_psnr[1];
    const double p3 = sw.prop_psnr[0], p4 = sw.prop_psnr[1];
    const bool wins = p3 > b3 && p4 > b4;
    const bool degrades_less = (b3 - b4) > (p3 - p4);
    const bool ok = wins && degrades_less && sw.c8_s < budget_s;
    return {ok, strf("psnr accel3 %.2f vs %.2f, accel4 %.2f vs %.2f (sampler vs baseline); "
                     "drop %.2f vs %.2f dB; train %.0f s, total %.0f s (budget %.0f s)",
                     p3, b3, p4, b4, p3 - p4, b3 - b4, sw.train_s, sw.c8_s, budget_s)};
}

Outcome sampler_quality_is_monotone(const SweepData& sw) {
    bool ok = true;
    for (std::size_t i = 0; i + 1 < sw.prop_psnr.size(); ++i) {
        if (sw.prop_psnr[i + 1] > sw.prop_psnr[i] + 1e-9) ok = false;
        if (sw.prop_nmse[i + 1] < sw.prop_nmse[i] - 1e-12) ok = false;
    }
    std::string seq = "psnr";
    for (const double v : sw.prop_psnr) seq += strf(" %.2f", v);
    seq += "; nmse";
    for (const double v : sw.prop_nmse) seq += strf(" %.4g", v);
    return {ok, strf("accel 3..8: %s (nonincreasing / nondecreasing required)", seq.c_str())};
}

// ---------------------------------------------------------------------------
// 10. Slice-separation kernels fit on a noiseless fully sampled calibration
//     region put almost all probe energy on the diagonal of the leakage
//     matrix: every row is strictly diagonally dominant.
// ---------------------------------------------------------------------------
Outcome leakage_matrix_is_row_dominant() {
    const std::size_t ny = 48, nx = 48, mb = 3, nc = 8;
    const auto spec = make_spec(mb, 2.0 / 3.0, 1, ny, 11);
    const ComplexArray truth = make_phantom(ny, nx, mb, 11);
    const CoilSensitivities maps = simulate_coils(ny, nx, nc, 11);
    const Acquisition acq = acquire(truth, maps, spec);
    const SliceGrappaKernels k = calibrate_slice_grappa(acq.acs_per_slice, spec, 5, 5);

    const LFactorReport rep = leakage_lfactor(k, maps, spec, truth);
    bool ok = true;
    double worst_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < mb; ++i) {
        double off = 0.0;
        for (std::size_t j = 0; j < mb; ++j)
            if (j != i) off += rep.matrix(i, j);
        if (!(rep.matrix(i, i) > off)) ok = false;
        worst_ratio = std::min(worst_ratio, rep.matrix(i, i) / std::max(off, 1e-300));
    }
    return {ok, strf("3 slices, full-grid calibration: min diagonal/off-row-sum ratio %.3g "
                     "(must exceed 1)",
                     worst_ratio)};
}

// ---------------------------------------------------------------------------
// 11. Determinism of the command-line pipeline: the same config and seed
//     produce byte-identical artifacts on a rerun of every stage.
// ---------------------------------------------------------------------------
int run_cli(const std::string& args, const fs::path& capture) {
    static int counter = 0;
    const fs::path of = capture / ("out" + std::to_string(counter++));
    const std::string cmd =
        std::string(SMSRECON_CLI_PATH) + " " + args + " >" + of.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> dir_snapshot(const fs::path& dir) {
    std::map<std::string, std::string> snap;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file())
            snap[fs::relative(entry.path(), dir).string()] = read_text_file(entry.path());
    return snap;
}

Outcome cli_pipeline_is_deterministic() {
    const fs::path root = fs::temp_directory_path() / "smsrecon_acceptance_cli";
    fs::remove_all(root);
    const fs::path capture = root / "capture";
    fs::create_directories(capture);

    const nlohmann::json cfg{
        {"seed", 21},
        {"sim",
         {{"ny", 16},
          {"nx", 16},
          {"mb", 2},
          {"nc", 4},
          {"caipi_fraction", 0.25},
          {"accel", 2},
          {"acs_lines", 8},
          {"noise_sigma", 0.0},
          {"n_train_slices", 4}}},
        {"calib", {{"kh", 3}, {"kw", 3}}},
        {"diffusion",
         {{"n_steps", 20},
          {"train",
           {{"epochs", 2}, {"steps_per_epoch", 4}, {"lr", 1e-3}, {"holdout_probes", 2}}}}},
        {"sampler", {{"spirit_iters", 10}}},
    };
    const fs::path cfg_path = root / "run.json";
    write_text_file(cfg_path, cfg.dump(2) + "\n");

    const auto pipeline = [&](const fs::path& out) -> int {
        const std::string c = " --config " + cfg_path.string();
        const fs::path sim = out / "sim", cal = out / "calib", mdl = out / "model";
        const fs::path rec = out / "recon", ev = out / "eval";
        int rc = 0;
        rc |= run_cli("simulate" + c + " --out " + sim.string(), capture);
        rc |= run_cli("calibrate" + c + " --data " + sim.string() + " --out " + cal.string(),
                      capture);
        rc |= run_cli("train" + c + " --out " + mdl.string(), capture);
        rc |= run_cli("recon" + c + " --method proposed --data " + sim.string() + " --calib " +
                          cal.string() + " --model " + mdl.string() + " --out " + rec.string(),
                      capture);
        rc |= run_cli("eval" + c + " --data " + sim.string() + " --recon " + rec.string() +
                          " --out " + ev.string(),
                      capture);
        return rc;
    };

    const fs::path run_a = root / "a", run_b = root / "b";
    const int rc_a = pipeline(run_a);
    const int rc_b = pipeline(run_b);
    if (rc_a != 0 || rc_b != 0)
        return {false, strf("pipeline exit codes %d / %d (want 0)", rc_a, rc_b)};

    const auto snap_a = dir_snapshot(run_a), snap_b = dir_snapshot(run_b);
    std::size_t differing = 0;
    for (const auto& [rel, bytes] : snap_a) {
        const auto it = snap_b.find(rel);
        if (it == snap_b.end() || it->second != bytes) ++differing;
    }
    const bool ok = snap_a.size() == snap_b.size() && differing == 0 && !snap_a.empty();
    return {ok, strf("two full runs, %zu files each: %zu differ (want 0)", snap_a.size(),
                     differing)};
}

} // namespace

int main() {
    std::printf("release gate: simultaneous multi-slice reconstruction toolkit\n");
    std::fflush(stdout);

    bool all_ok = true;
    all_ok &= run_criterion(1, "fft invariants", fft_invariants);
    all_ok &= run_criterion(2, "fov shift ramp", caipi_ramp_equals_image_shift);
    all_ok &= run_criterion(3, "kernel fits vs dense solves", calibration_matches_dense_solves);
    all_ok &= run_criterion(4, "unfolding exactness", sense_exactness);
    all_ok &= run_criterion(5, "self-consistency recon", spirit_consistency_and_recovery);
    all_ok &= run_criterion(6, "gaussian closure", gaussian_closure);
    all_ok &= run_criterion(7, "training gradient", training_gradient_check);

    std::optional<SweepData> sweep;
    std::string sweep_err;
    try {
        sweep = run_fixed_scene_sweep();
    } catch (const std::exception& e) {
        sweep_err = e.what();
    }
    all_ok &= run_criterion(8, "sampler vs baseline", [&]() -> Outcome {
        if (!sweep) return {false, strf("scene sweep failed: %s", sweep_err.c_str())};
        return sampler_beats_baseline(*sweep);
    });
    all_ok &= run_criterion(9, "monotone quality sweep", [&]() -> Outcome {
        if (!sweep) return {false, strf("scene sweep failed: %s", sweep_err.c_str())};
        return sampler_quality_is_monotone(*sweep);
    });

    all_ok &= run_criterion(10, "leakage dominance", leakage_matrix_is_row_dominant);
    all_ok &= run_criterion(11, "pipeline determinism", cli_pipeline_is_deterministic);

    std::printf("release gate: %s\n", all_ok ? "all criteria passed" : "FAILURES PRESENT");
    return all_ok ? 0 : 1;
}
