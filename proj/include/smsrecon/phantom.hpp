#ifndef SMSRECON_PHANTOM_HPP
#define SMSRECON_PHANTOM_HPP

#include "smsrecon/coils.hpp"
#include "smsrecon/rng.hpp"
#include "smsrecon/tensor.hpp"

namespace smsrecon {

namespace detail {

/// One random slice: elliptical envelope filled with anisotropic Gaussian
/// blobs plus sharp-edged elliptical inserts, magnitude normalized to peak 1,
/// low-order smooth phase. The hard insert boundaries keep realistic energy in
/// the outer k-space rows, so discarding high frequencies visibly hurts.
inline void fill_phantom_slice(ComplexArray& out, std::size_t s, std::size_t ny, std::size_t nx,
                               Rng& rng) {
    const int nblobs = 6 + static_cast<int>(rng.uniform() * 5.0); // 6..10
    struct Blob {
        double cu, cv, a, b, c, amp;
    };
    std::vector<Blob> blobs(nblobs);
    for (auto& bl : blobs) {
        const double rad = 0.34 * std::sqrt(rng.uniform());
        const double ang = rng.uniform(0.0, 2.0 * M_PI);
        bl.cu = rad * std::cos(ang);
        bl.cv = rad * std::sin(ang);
        const double w1 = rng.uniform(0.05, 0.20), w2 = rng.uniform(0.05, 0.20);
        const double th = rng.uniform(0.0, M_PI);
        const double ct = std::cos(th), st = std::sin(th);
        bl.a = ct * ct / (2 * w1 * w1) + st * st / (2 * w2 * w2);
        bl.b = st * st / (2 * w1 * w1) + ct * ct / (2 * w2 * w2);
        bl.c = st * ct * (1.0 / (w1 * w1) - 1.0 / (w2 * w2));
        bl.amp = rng.uniform(0.25, 1.0);
    }
    const int ninserts = 4 + static_cast<int>(rng.uniform() * 4.0); // 4..7
    struct Insert {
        double cu, cv, ru, rv, ct, st, amp;
    };
    std::vector<Insert> inserts(ninserts);
    for (auto& in : inserts) {
        const double rad = 0.30 * std::sqrt(rng.uniform());
        const double ang = rng.uniform(0.0, 2.0 * M_PI);
        in.cu = rad * std::cos(ang);
        in.cv = rad * std::sin(ang);
        in.ru = rng.uniform(0.03, 0.16);
        in.rv = rng.uniform(0.03, 0.16);
        const double th = rng.uniform(0.0, M_PI);
        in.ct = std::cos(th);
        in.st = std::sin(th);
        in.amp = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.25, 0.7);
    }
    const double ea = rng.uniform(0.38, 0.46), eb = rng.uniform(0.38, 0.46);
    // low-frequency phase field
    double pa[3], pfu[3], pfv[3], pph[3];
    for (int j = 0; j < 3; ++j) {
        pa[j] = rng.uniform(0.1, 0.35);
        pfu[j] = rng.uniform(-1.5, 1.5);
        pfv[j] = rng.uniform(-1.5, 1.5);
        pph[j] = rng.uniform(0.0, 2.0 * M_PI);
    }

    std::vector<double> mag(ny * nx, 0.0);
    double mag_max = 0.0;
    for (std::size_t r = 0; r < ny; ++r) {
        const double v = (static_cast<double>(r) + 0.5) / ny - 0.5;
        for (std::size_t x = 0; x < nx; ++x) {
            const double u = (static_cast<double>(x) + 0.5) / nx - 0.5;
            const double rho = (u * u) / (ea * ea) + (v * v) / (eb * eb);
            const double env = std::exp(-rho * rho * rho * 2.5); // super-Gaussian ellipse
            double m = 0.15;
            for (const auto& bl : blobs) {
                const double du = u - bl.cu, dv = v - bl.cv;
                m += bl.amp * std::exp(-(bl.a * du * du + bl.b * dv * dv + bl.c * du * dv));
            }
            for (const auto& in : inserts) {
                const double du = u - in.cu, dv = v - in.cv;
                const double pu = (in.ct * du + in.st * dv) / in.ru;
                const double pv = (-in.st * du + in.ct * dv) / in.rv;
                if (pu * pu + pv * pv < 1.0) m += in.amp;
            }
            const double val = env * std::max(m, 0.0);
            mag[r * nx + x] = val;
            mag_max = std::max(mag_max, val);
        }
    }
    for (std::size_t r = 0; r < ny; ++r) {
        const double v = (static_cast<double>(r) + 0.5) / ny - 0.5;
        for (std::size_t x = 0; x < nx; ++x) {
            const double u = (static_cast<double>(x) + 0.5) / nx - 0.5;
            double ph = 0.0;
            for (int j = 0; j < 3; ++j)
                ph += pa[j] * std::cos(2.0 * M_PI * (pfu[j] * u + pfv[j] * v) + pph[j]);
            out(s, r, x) = std::polar(mag[r * nx + x] / mag_max, ph);
        }
    }
}

} // namespace detail

/// Synthetic multi-slice ground truth: [n_slices, ny, nx] complex images with
/// magnitude in [0, 1], smooth phase, and a distinct layout of soft blobs and
/// sharp-edged inserts per slice.
inline ComplexArray make_phantom(std::size_t ny, std::size_t nx, std::size_t n_slices,
                                 std::uint64_t seed) {
    if (ny < 8 || nx < 8) throw ArgumentError("make_phantom: ny and nx must be >= 8");
    if (n_slices < 1) throw ArgumentError("make_phantom: n_slices must be >= 1");
    ComplexArray out({n_slices, ny, nx});
    for (std::size_t s = 0; s < n_slices; ++s) {
        Rng rng(mix64(seed, 0x5C1CE000ULL + s));
        detail::fill_phantom_slice(out, s, ny, nx, rng);
    }
    return out;
}

/// Smooth synthetic coil maps: one wide Gaussian profile per coil centered on a
/// ring around the FOV with a gentle phase roll, pixelwise normalized so that
/// sum_c |S_c|^2 = 1 everywhere.
inline CoilSensitivities simulate_coils(std::size_t ny, std::size_t nx, std::size_t nc,
                                        std::uint64_t seed) {
    if (nc < 1) throw ArgumentError("simulate_coils: nc must be >= 1");
    Rng rng(mix64(seed, 0xC011));
    ComplexArray maps({nc, ny, nx});
    for (std::size_t c = 0; c < nc; ++c) {
        const double ang = 2.0 * M_PI * (static_cast<double>(c) + rng.uniform(-0.15, 0.15)) / nc;
        const double cu = 0.55 * std::cos(ang), cv = 0.55 * std::sin(ang);
        const double w = rng.uniform(0.45, 0.65);
        const double gu = rng.uniform(-2.0, 2.0), gv = rng.uniform(-2.0, 2.0);
        const double g0 = rng.uniform(0.0, 2.0 * M_PI);
        for (std::size_t r = 0; r < ny; ++r) {
            const double v = (static_cast<double>(r) + 0.5) / ny - 0.5;
            for (std::size_t x = 0; x < nx; ++x) {
                const double u = (static_cast<double>(x) + 0.5) / nx - 0.5;
                const double d2 = (u - cu) * (u - cu) + (v - cv) * (v - cv);
                maps(c, r, x) = std::polar(std::exp(-d2 / (2 * w * w)), gu * u + gv * v + g0);
            }
        }
    }
    const std::size_t plane = ny * nx;
    for (std::size_t i = 0; i < plane; ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < nc; ++c) s += std::norm(maps[c * plane + i]);
        const double inv = 1.0 / std::sqrt(s);
        for (std::size_t c = 0; c < nc; ++c) maps[c * plane + i] *= inv;
    }
    return CoilSensitivities(std::move(maps));
}

} // namespace smsrecon

#endif
