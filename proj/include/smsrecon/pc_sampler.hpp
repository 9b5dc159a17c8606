#ifndef SMSRECON_PC_SAMPLER_HPP
#define SMSRECON_PC_SAMPLER_HPP

// Discrete reverse updates for the k-space diffusion process.
//
// Predictor (step i, from level t_{i+1} down to t_i):
//
//   z_i = z_{i+1} - P[(A_{i+1} - A_i) (.) zhat0]
//         + (sigma_{i+1}^2 - sigma_i^2) * score
//         + sqrt(sigma_{i+1}^2 - sigma_i^2) * P n
//
// where zhat0 is a clean-data estimate (the score model's denoise output, or
// an externally supplied data-consistent estimate) and P is the coil
// projector. Score-model outputs are already range-restricted per their
// contract; the zhat0 increment and the noise are projected here so that
// in-range iterates stay in range.
//
// Corrector: one annealed Langevin step z + eps*score + sqrt(2 eps) P n with
// eps = 2 (snr ||P n|| / ||score||)^2. A zero-norm score skips the step.

#include <cmath>
#include <functional>
#include <memory>

#include "smsrecon/coils.hpp"
#include "smsrecon/errors.hpp"
#include "smsrecon/rng.hpp"
#include "smsrecon/schedule.hpp"
#include "smsrecon/score_model.hpp"
#include "smsrecon/tensor.hpp"

namespace smsrecon {

using Projector = std::function<ComplexArray(const ComplexArray&)>;

inline Projector make_coil_projector(const CoilSensitivities& maps) {
    return [&maps](const ComplexArray& z) { return coil_project(z, maps); };
}

/// Predictor update with an explicit clean-data estimate and score value.
/// A null rng stubs the noise term to zero.
inline ComplexArray predictor_core(const ComplexArray& z_next, std::size_t i,
                                   const DiffusionSchedule& sched, const ComplexArray& zhat0,
                                   const ComplexArray& score_val, const Projector& project,
                                   Rng* rng) {
    if (i + 1 > sched.n_steps) throw ArgumentError("predictor_core: step index out of range");
    check_same_shape(z_next, zhat0, "predictor_core");
    check_same_shape(z_next, score_val, "predictor_core");

    const RealArray a_hi = sched.atten(i + 1);
    const RealArray a_lo = sched.atten(i);
    RealArray da(a_hi.shape());
    for (std::size_t p = 0; p < da.size(); ++p) da[p] = a_hi[p] - a_lo[p];
    const double s_hi = sched.sigma(i + 1), s_lo = sched.sigma(i);
    const double ds2 = s_hi * s_hi - s_lo * s_lo;

    ComplexArray out = sub(z_next, project(hadamard_last2(zhat0, da)));
    for (std::size_t p = 0; p < out.size(); ++p) out[p] += ds2 * score_val[p];
    if (rng) {
        ComplexArray n = project(rng->cnormal_array(z_next.shape()));
        const double amp = std::sqrt(ds2);
        for (std::size_t p = 0; p < out.size(); ++p) out[p] += amp * n[p];
    }
    if (!all_finite(out))
        throw NumericalError("predictor_core: non-finite iterate", static_cast<long>(i));
    return out;
}

/// Predictor that queries the score model for both the denoised estimate and
/// the score at level t_{i+1}.
inline ComplexArray predictor_step(const ComplexArray& z_next, std::size_t i,
                                   const DiffusionSchedule& sched, const ScoreModel& model,
                                   const CoilSensitivities& maps, Rng* rng) {
    const double t = sched.time(i + 1);
    const ComplexArray zhat0 = model.denoise(z_next, t, maps);
    const ComplexArray sc = model.score(z_next, t, maps);
    return predictor_core(z_next, i, sched, zhat0, sc, make_coil_projector(maps), rng);
}

inline ComplexArray predictor_step(const ComplexArray& z_next, std::size_t i,
                                   const DiffusionSchedule& sched, const ScoreModel& model,
                                   const CoilSensitivities& maps, std::uint64_t seed) {
    Rng rng(seed);
    return predictor_step(z_next, i, sched, model, maps, &rng);
}

/// Langevin corrector at an explicit time with an explicit score value.
inline ComplexArray corrector_core(const ComplexArray& z, const ComplexArray& score_val,
                                   const Projector& project, double snr, Rng* rng) {
    check_same_shape(z, score_val, "corrector_core");
    const double s_norm = norm2(score_val);
    if (s_norm == 0.0) return z; // no direction to move in; skip
    ComplexArray n = rng ? project(rng->cnormal_array(z.shape()))
                         : ComplexArray::zeros(z.shape());
    const double n_norm = norm2(n);
    const double eps = 2.0 * (snr * n_norm / s_norm) * (snr * n_norm / s_norm);
    const double amp = std::sqrt(2.0 * eps);
    ComplexArray out = z;
    for (std::size_t p = 0; p < out.size(); ++p) out[p] += eps * score_val[p] + amp * n[p];
    if (!all_finite(out)) throw NumericalError("corrector_core: non-finite iterate", 0);
    return out;
}

/// Corrector at level t_{i+1}, querying the model for the score.
inline ComplexArray corrector_step(const ComplexArray& z, std::size_t i,
                                   const DiffusionSchedule& sched, const ScoreModel& model,
                                   const CoilSensitivities& maps, double snr, Rng* rng) {
    if (i + 1 > sched.n_steps) throw ArgumentError("corrector_step: step index out of range");
    const ComplexArray sc = model.score(z, sched.time(i + 1), maps);
    return corrector_core(z, sc, make_coil_projector(maps), snr, rng);
}

inline ComplexArray corrector_step(const ComplexArray& z, std::size_t i,
                                   const DiffusionSchedule& sched, const ScoreModel& model,
                                   const CoilSensitivities& maps, double snr, std::uint64_t seed) {
    Rng rng(seed);
    return corrector_step(z, i, sched, model, maps, snr, &rng);
}

/// Full reverse chain on one multicoil k-space, from a t=1 state down to t=0.
/// Per step: n_corrector corrector updates then the predictor when
/// corrector_first, otherwise predictor then correctors at the new level.
inline ComplexArray run_reverse_chain(const ComplexArray& z_start, const DiffusionSchedule& sched,
                                      const ScoreModel& model, const CoilSensitivities& maps,
                                      std::size_t n_corrector, double snr, bool corrector_first,
                                      Rng* rng) {
    ComplexArray z = z_start;
    const Projector project = make_coil_projector(maps);
    for (std::size_t step = sched.n_steps; step-- > 0;) {
        const double t_hi = sched.time(step + 1), t_lo = sched.time(step);
        if (corrector_first)
            for (std::size_t c = 0; c < n_corrector; ++c)
                z = corrector_core(z, model.score(z, t_hi, maps), project, snr, rng);
        const ComplexArray zhat0 = model.denoise(z, t_hi, maps);
        const ComplexArray sc = model.score(z, t_hi, maps);
        z = predictor_core(z, step, sched, zhat0, sc, project, rng);
        if (!corrector_first)
            for (std::size_t c = 0; c < n_corrector; ++c)
                z = corrector_core(z, model.score(z, t_lo, maps), project, snr, rng);
    }
    // Return the clean-data estimate at the final time rather than the raw
    // state, which still carries the last step's injected noise.
    return model.denoise(z, sched.time(0), maps);
}

} // namespace smsrecon

#endif
