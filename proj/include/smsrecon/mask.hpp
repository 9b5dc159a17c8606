#ifndef SMSRECON_MASK_HPP
#define SMSRECON_MASK_HPP

#include <cstdint>
#include <vector>

#include "smsrecon/tensor.hpp"

namespace smsrecon {

/// Phase-encode sampling pattern: every accel-th line starting at 0, plus a
/// centered block of acs_lines fully sampled lines.
struct SamplingMask {
    std::size_t ny = 0;
    std::vector<std::uint8_t> pattern; // one flag per ky line
    std::size_t accel = 1;
    std::size_t acs_lines = 0;

    bool line(std::size_t r) const { return pattern[r] != 0; }

    std::size_t acquired_count() const {
        std::size_t n = 0;
        for (auto p : pattern) n += p;
        return n;
    }

    /// First row of the ACS block (centered on ny/2).
    std::size_t acs_start() const { return ny / 2 - acs_lines / 2; }
};

inline SamplingMask make_uniform_mask(std::size_t ny, std::size_t accel, std::size_t acs_lines) {
    if (accel < 1 || accel > ny)
        throw ArgumentError("make_uniform_mask: accel must be in [1, ny]");
    if (acs_lines > ny)
        throw ArgumentError("make_uniform_mask: acs_lines exceeds ny");
    SamplingMask m;
    m.ny = ny;
    m.accel = accel;
    m.acs_lines = acs_lines;
    m.pattern.assign(ny, 0);
    for (std::size_t r = 0; r < ny; r += accel) m.pattern[r] = 1;
    const std::size_t start = ny / 2 - acs_lines / 2;
    for (std::size_t r = start; r < start + acs_lines; ++r) m.pattern[r] = 1;
    return m;
}

/// Zero the unacquired ky lines of every trailing [ny, nx] plane.
inline ComplexArray apply_mask(const ComplexArray& ksp, const SamplingMask& mask) {
    if (ksp.ndim() < 2 || ksp.rows() != mask.ny)
        throw ShapeError("apply_mask: ky dimension " + shape_str(ksp.shape()) + " does not match mask ny=" +
                         std::to_string(mask.ny));
    ComplexArray out = ksp;
    const std::size_t ny = mask.ny, nx = out.cols();
    for (std::size_t p = 0; p < out.size() / (ny * nx); ++p)
        for (std::size_t r = 0; r < ny; ++r)
            if (!mask.line(r)) {
                cxd* row = out.data() + (p * ny + r) * nx;
                std::fill(row, row + nx, cxd{});
            }
    return out;
}

} // namespace smsrecon

#endif
