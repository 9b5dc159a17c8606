#ifndef SMSRECON_SCHEDULE_HPP
#define SMSRECON_SCHEDULE_HPP

// Frequency-attenuation / noise schedule for the k-space diffusion process.
//
// Time runs on the uniform grid t_i = i / n_steps, i = 0..n_steps. The
// forward process attenuates k-space location k by the cumulative factor
//
//   A_t(k) = exp(-t * ||k||^2 / rho^2)
//
// with k measured in normalized cycles per sample (axis Nyquist at 1/2), so
// DC is never attenuated and attenuation deepens monotonically with both t
// and |k|. The noise level interpolates geometrically:
// sigma(t) = sigma_min * (sigma_max / sigma_min)^t.

#include <cmath>
#include <cstddef>

#include "smsrecon/errors.hpp"
#include "smsrecon/tensor.hpp"

namespace smsrecon {

struct DiffusionSchedule {
    std::size_t ny = 0, nx = 0;
    std::size_t n_steps = 0;
    double sigma_min = 0.0, sigma_max = 0.0, rho = 0.0;
    RealArray k2_over_rho2; // [ny, nx], precomputed ||k||^2 / rho^2

    double time(std::size_t i) const {
        if (i > n_steps) throw ArgumentError("DiffusionSchedule: step index out of range");
        return static_cast<double>(i) / static_cast<double>(n_steps);
    }

    double sigma_at(double t) const { return sigma_min * std::pow(sigma_max / sigma_min, t); }
    double sigma(std::size_t i) const { return sigma_at(time(i)); }

    RealArray atten_at(double t) const {
        RealArray a(k2_over_rho2.shape());
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::exp(-t * k2_over_rho2[i]);
        return a;
    }
    RealArray atten(std::size_t i) const { return atten_at(time(i)); }
};

inline DiffusionSchedule make_schedule(std::size_t ny, std::size_t nx, std::size_t n_steps,
                                       double sigma_min = 0.01, double sigma_max = 1.0,
                                       double rho = 0.125) {
    if (ny == 0 || nx == 0) throw ArgumentError("make_schedule: grid dims must be positive");
    if (n_steps < 1) throw ArgumentError("make_schedule: n_steps must be >= 1");
    if (!(0.0 < sigma_min && sigma_min < sigma_max))
        throw ArgumentError("make_schedule: require 0 < sigma_min < sigma_max");
    if (rho <= 0.0) throw ArgumentError("make_schedule: rho must be positive");

    DiffusionSchedule s;
    s.ny = ny;
    s.nx = nx;
    s.n_steps = n_steps;
    s.sigma_min = sigma_min;
    s.sigma_max = sigma_max;
    s.rho = rho;
    s.k2_over_rho2 = RealArray::zeros({ny, nx});
    for (std::size_t r = 0; r < ny; ++r) {
        const double ky = (static_cast<double>(r) - static_cast<double>(ny / 2)) /
                          static_cast<double>(ny);
        for (std::size_t c = 0; c < nx; ++c) {
            const double kx = (static_cast<double>(c) - static_cast<double>(nx / 2)) /
                              static_cast<double>(nx);
            s.k2_over_rho2(r, c) = (ky * ky + kx * kx) / (rho * rho);
        }
    }
    return s;
}

} // namespace smsrecon

#endif
