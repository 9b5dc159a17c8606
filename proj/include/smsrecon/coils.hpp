#ifndef SMSRECON_COILS_HPP
#define SMSRECON_COILS_HPP

#include "smsrecon/fft.hpp"
#include "smsrecon/tensor.hpp"

namespace smsrecon {

/// Per-coil complex sensitivity maps [nc, ny, nx], pixelwise normalized so that
/// sum_c |S_c|^2 = 1 on the support and 0 outside it.
struct CoilSensitivities {
    ComplexArray maps;

    CoilSensitivities() = default;
    explicit CoilSensitivities(ComplexArray m) : maps(std::move(m)) {
        if (maps.ndim() != 3) throw ShapeError("CoilSensitivities: maps must be [nc, ny, nx]");
    }

    std::size_t nc() const { return maps.dim(0); }
    std::size_t ny() const { return maps.dim(1); }
    std::size_t nx() const { return maps.dim(2); }

    /// x = sum_c conj(S_c) . x_c
    ComplexArray combine(const ComplexArray& coil_images) const {
        check_same_shape(coil_images, maps, "CoilSensitivities::combine");
        ComplexArray out({ny(), nx()});
        const std::size_t plane = ny() * nx();
        for (std::size_t c = 0; c < nc(); ++c)
            for (std::size_t i = 0; i < plane; ++i)
                out[i] += std::conj(maps[c * plane + i]) * coil_images[c * plane + i];
        return out;
    }

    /// x_c = S_c . x
    ComplexArray expand(const ComplexArray& image) const {
        if (image.ndim() != 2 || image.dim(0) != ny() || image.dim(1) != nx())
            throw ShapeError("CoilSensitivities::expand: image shape mismatch");
        ComplexArray out(maps.shape());
        const std::size_t plane = ny() * nx();
        for (std::size_t c = 0; c < nc(); ++c)
            for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] = maps[c * plane + i] * image[i];
        return out;
    }
};

/// Orthogonal projection of multicoil k-space onto the coil-consistent subspace:
/// transform to image domain, combine, re-expand, transform back.
inline ComplexArray coil_project(const ComplexArray& ksp, const CoilSensitivities& maps) {
    check_same_shape(ksp, maps.maps, "coil_project");
    return fft2c(maps.expand(maps.combine(ifft2c(ksp))));
}

/// Low-resolution sensitivity estimation: embed the ACS block at the k-space
/// center, taper its ky extent with a raised-cosine, inverse-transform and
/// normalize by the root-sum-of-squares image.
inline CoilSensitivities estimate_sensitivities(const ComplexArray& acs, std::size_t ny, std::size_t nx) {
    if (acs.ndim() != 3) throw ShapeError("estimate_sensitivities: acs must be [nc, acs_lines, nx]");
    const std::size_t nc = acs.dim(0), nacs = acs.dim(1);
    if (acs.dim(2) != nx || nacs > ny)
        throw ShapeError("estimate_sensitivities: acs block does not fit target grid");
    if (norm2(acs) == 0.0) throw DegenerateInputError("estimate_sensitivities: all-zero ACS");

    std::vector<double> window(nacs);
    for (std::size_t j = 0; j < nacs; ++j)
        window[j] = 0.5 - 0.5 * std::cos(2.0 * M_PI * (j + 0.5) / static_cast<double>(nacs));

    const std::size_t start = ny / 2 - nacs / 2;
    ComplexArray padded({nc, ny, nx});
    for (std::size_t c = 0; c < nc; ++c)
        for (std::size_t r = 0; r < nacs; ++r)
            for (std::size_t x = 0; x < nx; ++x)
                padded(c, start + r, x) = acs(c, r, x) * window[r];

    ComplexArray imgs = ifft2c(padded);
    const std::size_t plane = ny * nx;
    RealArray rss({ny, nx});
    double rss_max = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < nc; ++c) s += std::norm(imgs[c * plane + i]);
        rss[i] = std::sqrt(s);
        rss_max = std::max(rss_max, rss[i]);
    }
    const double eps = 1e-6 * rss_max;
    ComplexArray maps({nc, ny, nx});
    for (std::size_t i = 0; i < plane; ++i) {
        if (rss[i] > eps)
            for (std::size_t c = 0; c < nc; ++c) maps[c * plane + i] = imgs[c * plane + i] / rss[i];
    }
    return CoilSensitivities(std::move(maps));
}

} // namespace smsrecon

#endif
