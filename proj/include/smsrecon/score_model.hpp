#ifndef SMSRECON_SCORE_MODEL_HPP
#define SMSRECON_SCORE_MODEL_HPP

// Score-model interface for the k-space diffusion process, the forward
// perturbation it inverts, and a closed-form Gaussian reference model.
//
// Conventions (all mutually consistent, exercised by the closure tests):
//  * complex white noise n has E|n|^2 = 1 per sample (cnormal);
//  * a complex Gaussian CN(m, v) has total variance v = E|z - m|^2;
//  * the score of CN(m, v) is -(z - m)/v (so one pointwise marginal
//    z_t ~ CN(A_t m, A_t^2 v + sigma^2) has score -(z - A_t m)/(A_t^2 v + sigma^2)).

#include <memory>

#include "smsrecon/coils.hpp"
#include "smsrecon/errors.hpp"
#include "smsrecon/rng.hpp"
#include "smsrecon/schedule.hpp"
#include "smsrecon/tensor.hpp"

namespace smsrecon {

class ScoreModel {
  public:
    virtual ~ScoreModel() = default;
    /// Gradient of the log marginal density at noise level t, in the range of
    /// the coil projector.
    virtual ComplexArray score(const ComplexArray& z, double t,
                               const CoilSensitivities& maps) const = 0;
    /// Estimate of the clean k-space given the perturbed iterate at level t.
    virtual ComplexArray denoise(const ComplexArray& z, double t,
                                 const CoilSensitivities& maps) const = 0;
};

/// Sample the forward marginal: A_t (.) z0 + sigma(t) * coil_project(n).
/// A null rng stubs the noise to zero.
inline ComplexArray forward_perturb(const ComplexArray& z0, double t,
                                    const DiffusionSchedule& sched, const CoilSensitivities& maps,
                                    Rng* rng) {
    if (z0.ndim() != 3) throw ShapeError("forward_perturb: expected [nc, ny, nx]");
    if (z0.dim(1) != sched.ny || z0.dim(2) != sched.nx)
        throw ShapeError("forward_perturb: grid does not match schedule");
    const RealArray a = sched.atten_at(t);
    ComplexArray out = hadamard_last2(z0, a);
    if (rng) {
        ComplexArray n = rng->cnormal_array(z0.shape());
        n = coil_project(n, maps);
        const double s = sched.sigma_at(t);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * n[i];
    }
    return out;
}

inline ComplexArray forward_perturb(const ComplexArray& z0, double t,
                                    const DiffusionSchedule& sched, const CoilSensitivities& maps,
                                    std::uint64_t seed) {
    Rng rng(seed);
    return forward_perturb(z0, t, sched, maps, &rng);
}

/// Tweedie conversion: score implied by a denoiser output,
/// P (A_t (.) zhat0 - z) / sigma(t)^2.
inline ComplexArray score_from_denoise(const ComplexArray& z, const ComplexArray& zhat0, double t,
                                       const DiffusionSchedule& sched,
                                       const CoilSensitivities& maps) {
    const RealArray a = sched.atten_at(t);
    const double s2 = sched.sigma_at(t) * sched.sigma_at(t);
    ComplexArray r = sub(hadamard_last2(zhat0, a), z);
    r = coil_project(r, maps);
    return scale(r, 1.0 / s2);
}

/// Tweedie conversion the other way: z/A_t + (sigma^2/A_t) P score, applied
/// where A_t exceeds eps (elsewhere the estimate is left at zero).
inline ComplexArray denoise_from_score(const ComplexArray& z, const ComplexArray& score, double t,
                                       const DiffusionSchedule& sched, const CoilSensitivities& maps,
                                       double eps = 1e-12) {
    const RealArray a = sched.atten_at(t);
    const double s2 = sched.sigma_at(t) * sched.sigma_at(t);
    const ComplexArray ps = coil_project(score, maps);
    ComplexArray out = ComplexArray::zeros(z.shape());
    const std::size_t plane = a.size();
    for (std::size_t p = 0; p < z.size() / plane; ++p)
        for (std::size_t i = 0; i < plane; ++i) {
            const double av = a[i];
            if (av > eps)
                out[p * plane + i] = z[p * plane + i] / av + (s2 / av) * ps[p * plane + i];
        }
    return out;
}

/// Closed-form model for a Gaussian prior z0 ~ CN(mean, var) pushed through
/// the forward marginal; the validation instrument for the samplers.
class AnalyticGaussianScore final : public ScoreModel {
  public:
    AnalyticGaussianScore(ComplexArray mean, double var, DiffusionSchedule sched)
        : mean_(std::move(mean)), var_(var), sched_(std::move(sched)) {
        if (var_ <= 0.0) throw ArgumentError("AnalyticGaussianScore: var must be positive");
        if (mean_.ndim() != 3) throw ShapeError("AnalyticGaussianScore: mean must be [nc, ny, nx]");
    }

    ComplexArray score(const ComplexArray& z, double t,
                       const CoilSensitivities& maps) const override {
        check_same_shape(z, mean_, "AnalyticGaussianScore::score");
        const RealArray a = sched_.atten_at(t);
        const double s2 = sched_.sigma_at(t) * sched_.sigma_at(t);
        ComplexArray r = sub(z, hadamard_last2(mean_, a));
        const std::size_t plane = a.size();
        for (std::size_t p = 0; p < r.size() / plane; ++p)
            for (std::size_t i = 0; i < plane; ++i)
                r[p * plane + i] /= -(a[i] * a[i] * var_ + s2);
        return coil_project(r, maps);
    }

    ComplexArray denoise(const ComplexArray& z, double t,
                         const CoilSensitivities& maps) const override {
        check_same_shape(z, mean_, "AnalyticGaussianScore::denoise");
        const RealArray a = sched_.atten_at(t);
        const double s2 = sched_.sigma_at(t) * sched_.sigma_at(t);
        ComplexArray r = coil_project(sub(z, hadamard_last2(mean_, a)), maps);
        ComplexArray out = mean_;
        const std::size_t plane = a.size();
        for (std::size_t p = 0; p < r.size() / plane; ++p)
            for (std::size_t i = 0; i < plane; ++i) {
                const double gain = a[i] * var_ / (a[i] * a[i] * var_ + s2);
                out[p * plane + i] += gain * r[p * plane + i];
            }
        return out;
    }

    const ComplexArray& mean() const { return mean_; }
    double var() const { return var_; }

  private:
    ComplexArray mean_;
    double var_;
    DiffusionSchedule sched_;
};

inline std::shared_ptr<ScoreModel> analytic_gaussian_score(ComplexArray mean, double var,
                                                           const DiffusionSchedule& sched) {
    return std::make_shared<AnalyticGaussianScore>(std::move(mean), var, sched);
}

} // namespace smsrecon

#endif
