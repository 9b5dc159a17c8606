#ifndef SMSRECON_METRICS_HPP
#define SMSRECON_METRICS_HPP

// Image-quality metrics (NMSE, PSNR, SSIM) on magnitude images.
//
// Complex inputs are compared by magnitude. PSNR and SSIM use the reference
// peak as the dynamic range, which makes all three metrics invariant to a
// common positive rescaling of reference and test.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "smsrecon/errors.hpp"
#include "smsrecon/tensor.hpp"

namespace smsrecon {

namespace detail {

inline void check_metric_inputs(const RealArray& ref, const RealArray& test, const char* op) {
    if (ref.size() == 0 || test.size() == 0)
        throw ArgumentError(std::string(op) + ": empty input");
    check_same_shape(ref, test, op);
}

} // namespace detail

/// Normalized mean squared error: ||test - ref||^2 / ||ref||^2.
inline double nmse(const RealArray& ref, const RealArray& test) {
    detail::check_metric_inputs(ref, test, "nmse");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double d = test[i] - ref[i];
        num += d * d;
        den += ref[i] * ref[i];
    }
    if (den == 0.0) throw DegenerateInputError("nmse: reference image is identically zero");
    return num / den;
}

/// Peak signal-to-noise ratio in dB; peak is max |ref|. Identical images -> +inf.
inline double psnr(const RealArray& ref, const RealArray& test) {
    detail::check_metric_inputs(ref, test, "psnr");
    double peak = 0.0, mse = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        peak = std::max(peak, std::abs(ref[i]));
        const double d = test[i] - ref[i];
        mse += d * d;
    }
    mse /= static_cast<double>(ref.size());
    if (peak == 0.0) throw DegenerateInputError("psnr: reference image is identically zero");
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

/// Mean structural similarity over all fully-interior (valid) 11x11 windows.
///
/// Gaussian window (sigma 1.5) normalized to unit sum; stabilizers
/// C1=(k1*L)^2, C2=(k2*L)^2 with k1=0.01, k2=0.03 and L = max |ref| unless a
/// positive dynamic_range is supplied.
inline double ssim(const RealArray& ref, const RealArray& test, std::size_t window = 11,
                   double sigma = 1.5, double k1 = 0.01, double k2 = 0.03,
                   double dynamic_range = 0.0) {
    detail::check_metric_inputs(ref, test, "ssim");
    if (ref.ndim() != 2) throw ShapeError("ssim: expected 2-D images");
    if (window == 0 || window % 2 == 0) throw ArgumentError("ssim: window must be odd");
    const std::size_t ny = ref.dim(0), nx = ref.dim(1);
    if (ny < window || nx < window)
        throw ArgumentError("ssim: image smaller than the filter window");

    double L = dynamic_range;
    if (L <= 0.0) {
        for (std::size_t i = 0; i < ref.size(); ++i) L = std::max(L, std::abs(ref[i]));
        if (L <= 0.0) throw DegenerateInputError("ssim: reference image is identically zero");
    }
    const double c1 = (k1 * L) * (k1 * L);
    const double c2 = (k2 * L) * (k2 * L);

    // Unit-sum Gaussian taps.
    std::vector<double> g(window);
    const double h = static_cast<double>(window / 2);
    double gsum = 0.0;
    for (std::size_t i = 0; i < window; ++i) {
        const double d = static_cast<double>(i) - h;
        g[i] = std::exp(-0.5 * d * d / (sigma * sigma));
        gsum += g[i];
    }
    for (auto& v : g) v /= gsum;

    // Separable valid-mode filtering of {x, y, x^2, y^2, xy}.
    const std::size_t oy = ny - window + 1, ox = nx - window + 1;
    auto filter_valid = [&](auto&& value_at) {
        // Horizontal pass then vertical pass.
        std::vector<double> tmp(ny * ox, 0.0);
        for (std::size_t r = 0; r < ny; ++r)
            for (std::size_t c = 0; c < ox; ++c) {
                double acc = 0.0;
                for (std::size_t j = 0; j < window; ++j) acc += g[j] * value_at(r, c + j);
                tmp[r * ox + c] = acc;
            }
        std::vector<double> out(oy * ox, 0.0);
        for (std::size_t r = 0; r < oy; ++r)
            for (std::size_t c = 0; c < ox; ++c) {
                double acc = 0.0;
                for (std::size_t j = 0; j < window; ++j) acc += g[j] * tmp[(r + j) * ox + c];
                out[r * ox + c] = acc;
            }
        return out;
    };

    auto X = [&](std::size_t r, std::size_t c) { return ref[r * nx + c]; };
    auto Y = [&](std::size_t r, std::size_t c) { return test[r * nx + c]; };
    const auto mu_x = filter_valid(X);
    const auto mu_y = filter_valid(Y);
    const auto xx = filter_valid([&](std::size_t r, std::size_t c) { return X(r, c) * X(r, c); });
    const auto yy = filter_valid([&](std::size_t r, std::size_t c) { return Y(r, c) * Y(r, c); });
    const auto xy = filter_valid([&](std::size_t r, std::size_t c) { return X(r, c) * Y(r, c); });

    double total = 0.0;
    for (std::size_t i = 0; i < oy * ox; ++i) {
        const double mx = mu_x[i], my = mu_y[i];
        const double vx = xx[i] - mx * mx;
        const double vy = yy[i] - my * my;
        const double cxy = xy[i] - mx * my;
        const double num = (2.0 * mx * my + c1) * (2.0 * cxy + c2);
        const double den = (mx * mx + my * my + c1) * (vx + vy + c2);
        total += num / den;
    }
    return total / static_cast<double>(oy * ox);
}

/// Complex overloads: compare magnitudes.
inline double nmse(const ComplexArray& ref, const ComplexArray& test) {
    return nmse(abs(ref), abs(test));
}
inline double psnr(const ComplexArray& ref, const ComplexArray& test) {
    return psnr(abs(ref), abs(test));
}
inline double ssim(const ComplexArray& ref, const ComplexArray& test) {
    return ssim(abs(ref), abs(test));
}

} // namespace smsrecon

#endif
