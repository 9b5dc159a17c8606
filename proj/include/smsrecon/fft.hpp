#ifndef SMSRECON_FFT_HPP
#define SMSRECON_FFT_HPP

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

#include "smsrecon/tensor.hpp"

// Centered, orthonormal 2-D Fourier transforms over the trailing two axes.
// Conventions:
//   - DC sits at (ny/2, nx/2) (floor division), matching the k-space-center layout of ACS data.
//   - Both directions scale by 1/sqrt(ny*nx), so fft2c preserves energy (Parseval) and
//     ifft2c(fft2c(x)) == x.
// Equivalent to fftshift(fft2(ifftshift(x))) / sqrt(ny*nx) and its inverse.

namespace smsrecon {

namespace detail {

// One FFTW plan per (ny, nx, sign), executed via the new-array interface.
// Plan creation is serialized; execution on distinct buffers is thread-safe.
class FftPlanCache {
public:
    static FftPlanCache& instance() {
        static FftPlanCache cache;
        return cache;
    }

    fftw_plan get(int ny, int nx, int sign) {
        std::lock_guard<std::mutex> lock(mu_);
        auto key = std::make_tuple(ny, nx, sign);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        std::vector<cxd> probe(static_cast<std::size_t>(ny) * std::max(nx, 1));
        fftw_plan p;
        if (nx == 0) // 1-D plan of length ny
            p = fftw_plan_dft_1d(ny, reinterpret_cast<fftw_complex*>(probe.data()),
                                 reinterpret_cast<fftw_complex*>(probe.data()), sign,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
        else
            p = fftw_plan_dft_2d(ny, nx, reinterpret_cast<fftw_complex*>(probe.data()),
                                 reinterpret_cast<fftw_complex*>(probe.data()), sign,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, p);
        return p;
    }

    FftPlanCache(const FftPlanCache&) = delete;
    FftPlanCache& operator=(const FftPlanCache&) = delete;

private:
    FftPlanCache() = default;
    ~FftPlanCache() {
        for (auto& [key, p] : plans_) fftw_destroy_plan(p);
    }

    std::mutex mu_;
    std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

// out[(r,c)] = in[((r + sr) mod ny, (c + sc) mod nx)]
inline void shifted_copy(const cxd* in, cxd* out, int ny, int nx, int sr, int sc) {
    for (int r = 0; r < ny; ++r) {
        const cxd* src = in + static_cast<std::size_t>((r + sr) % ny) * nx;
        cxd* dst = out + static_cast<std::size_t>(r) * nx;
        for (int c = 0; c < nx; ++c) dst[c] = src[(c + sc) % nx];
    }
}

inline ComplexArray transform2c(const ComplexArray& x, int sign) {
    if (x.ndim() < 2)
        throw ShapeError("fft2c/ifft2c: need >= 2 dims, got shape " + shape_str(x.shape()));
    const int ny = static_cast<int>(x.rows());
    const int nx = static_cast<int>(x.cols());
    const std::size_t plane = static_cast<std::size_t>(ny) * nx;
    const int hy = ny / 2, hx = nx / 2;
    const double inv_root = 1.0 / std::sqrt(static_cast<double>(plane));
    fftw_plan plan = FftPlanCache::instance().get(ny, nx, sign);

    ComplexArray out(x.shape());
    std::vector<cxd> buf(plane);
    for (std::size_t p = 0; p < x.size() / plane; ++p) {
        const cxd* src = x.data() + p * plane;
        cxd* dst = out.data() + p * plane;
        shifted_copy(src, buf.data(), ny, nx, hy, hx); // ifftshift
        fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(buf.data()),
                         reinterpret_cast<fftw_complex*>(buf.data()));
        shifted_copy(buf.data(), dst, ny, nx, ny - hy, nx - hx); // fftshift
        for (std::size_t i = 0; i < plane; ++i) dst[i] *= inv_root;
    }
    return out;
}

// Centered orthonormal transform along the LAST axis only, batched over the rest.
inline ComplexArray transform1c(const ComplexArray& x, int sign) {
    if (x.ndim() < 1) throw ShapeError("transform1c: array must have at least 1 dimension");
    const std::size_t n = x.dim(x.ndim() - 1);
    const std::size_t h = n / 2;
    const double inv_root = 1.0 / std::sqrt(static_cast<double>(n));
    fftw_plan plan = FftPlanCache::instance().get(static_cast<int>(n), 0, sign);

    ComplexArray out(x.shape());
    std::vector<cxd> buf(n);
    for (std::size_t p = 0; p < x.size() / n; ++p) {
        const cxd* src = x.data() + p * n;
        cxd* dst = out.data() + p * n;
        for (std::size_t i = 0; i < n; ++i) buf[i] = src[(i + h) % n]; // ifftshift
        fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(buf.data()),
                         reinterpret_cast<fftw_complex*>(buf.data()));
        for (std::size_t i = 0; i < n; ++i) dst[i] = buf[(i + (n - h)) % n] * inv_root; // fftshift
    }
    return out;
}

} // namespace detail

/// Image -> k-space over the trailing two axes (batched over leading dims).
inline ComplexArray fft2c(const ComplexArray& img) { return detail::transform2c(img, FFTW_FORWARD); }

/// k-space -> image; exact inverse of fft2c.
inline ComplexArray ifft2c(const ComplexArray& ksp) { return detail::transform2c(ksp, FFTW_BACKWARD); }

/// Centered orthonormal 1-D transforms along the last axis (DC at n/2).
inline ComplexArray fft1c(const ComplexArray& x) { return detail::transform1c(x, FFTW_FORWARD); }
inline ComplexArray ifft1c(const ComplexArray& x) { return detail::transform1c(x, FFTW_BACKWARD); }

/// Move DC from index 0 to index n/2 along the trailing two axes.
inline ComplexArray fftshift2(const ComplexArray& x) {
    return roll2(x, static_cast<long>(x.rows() / 2), static_cast<long>(x.cols() / 2));
}

inline ComplexArray ifftshift2(const ComplexArray& x) {
    return roll2(x, -static_cast<long>(x.rows() / 2), -static_cast<long>(x.cols() / 2));
}

} // namespace smsrecon

#endif
