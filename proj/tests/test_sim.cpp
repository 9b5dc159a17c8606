// Simulation stack: centered FFTs, CAIPIRINHA shifts, sampling masks,
// synthetic phantoms and coils, and the multiband acquisition model.

#include <cmath>
#include <complex>

#include <gtest/gtest.h>

#include <smsrecon/acquisition.hpp>
#include <smsrecon/fft.hpp>
#include <smsrecon/mask.hpp>
#include <smsrecon/phantom.hpp>
#include <smsrecon/rng.hpp>

#include "oracles.hpp"

using namespace smsrecon;
using oracles::rel_err;

namespace {

AcquisitionSpec make_spec(std::size_t mb, double caipi, std::size_t accel, std::size_t acs,
                          double noise = 0.0, std::uint64_t seed = 1) {
    AcquisitionSpec s;
    s.mb = mb;
    s.caipi_fraction = caipi;
    s.accel = accel;
    s.acs_lines = acs;
    s.noise_sigma = noise;
    s.seed = seed;
    return s;
}

/// Direct centered orthonormal 1-D DFT along the last axis.
ComplexArray dft1c_direct(const ComplexArray& x, int sign) {
    const std::size_t n = x.dim(x.ndim() - 1), nrows = x.size() / n;
    const double c = static_cast<double>(n / 2);
    ComplexArray out(x.shape());
    for (std::size_t row = 0; row < nrows; ++row)
        for (std::size_t k = 0; k < n; ++k) {
            cxd acc = 0.0;
            for (std::size_t r = 0; r < n; ++r)
                acc += x[row * n + r] *
                       std::polar(1.0, sign * 2.0 * oracles::kPi * (static_cast<double>(k) - c) *
                                           (static_cast<double>(r) - c) / static_cast<double>(n));
            out[row * n + k] = acc / std::sqrt(static_cast<double>(n));
        }
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// Centered orthonormal FFTs
// ---------------------------------------------------------------------------

TEST(Fft2c, MatchesDirectSummationOracle) {
    Rng rng(42);
    for (auto [ny, nx] : {std::pair<std::size_t, std::size_t>{8, 8}, {4, 4}, {8, 6}}) {
        ComplexArray x = rng.cnormal_array({2, ny, nx});
        EXPECT_LT(rel_err(oracles::fft2c_direct(x), fft2c(x)), 1e-12) << ny << "x" << nx;
        EXPECT_LT(rel_err(oracles::ifft2c_direct(x), ifft2c(x)), 1e-12) << ny << "x" << nx;
    }
}

TEST(Fft2c, RoundTripAndParseval) {
    Rng rng(7);
    for (std::size_t trial = 0; trial < 20; ++trial) {
        const std::size_t ny = 2 * (1 + rng.bits() % 16), nx = 2 * (1 + rng.bits() % 16);
        ComplexArray x = rng.cnormal_array({ny, nx});
        ComplexArray back = ifft2c(fft2c(x));
        EXPECT_LT(rel_err(x, back), 1e-12);
        EXPECT_NEAR(norm2(fft2c(x)), norm2(x), 1e-10 * norm2(x));
    }
}

TEST(Fft2c, LinearityAndCenteredDelta) {
    Rng rng(3);
    ComplexArray x = rng.cnormal_array({8, 8}), y = rng.cnormal_array({8, 8});
    const cxd a(0.7, -1.3);
    ComplexArray lhs = fft2c(add(scale(x, a), y));
    ComplexArray rhs = add(scale(fft2c(x), a), fft2c(y));
    EXPECT_LT(rel_err(lhs, rhs), 1e-13);

    // A unit impulse at the (ny/2, nx/2) center transforms to a flat spectrum.
    ComplexArray delta({8, 8});
    delta(4, 4) = 1.0;
    ComplexArray spec = fft2c(delta);
    for (std::size_t i = 0; i < spec.size(); ++i)
        EXPECT_NEAR(std::abs(spec[i] - cxd(1.0 / 8.0, 0.0)), 0.0, 1e-14);
}

TEST(Fft1c, MatchesDirectSummationOracleAndRoundTrips) {
    Rng rng(11);
    ComplexArray x = rng.cnormal_array({3, 5, 8});
    EXPECT_LT(rel_err(dft1c_direct(x, -1), fft1c(x)), 1e-12);
    EXPECT_LT(rel_err(dft1c_direct(x, +1), ifft1c(x)), 1e-12);
    EXPECT_LT(rel_err(x, ifft1c(fft1c(x))), 1e-12);
    EXPECT_NEAR(norm2(fft1c(x)), norm2(x), 1e-10 * norm2(x));
}

TEST(Fft2c, ShiftTheoremRampEqualsImageRoll) {
    Rng rng(21);
    const std::size_t ny = 12, nx = 8;
    ComplexArray img = rng.cnormal_array({ny, nx});
    ComplexArray ksp = fft2c(img);
    const long d = 5;
    ComplexArray ramped(ksp.shape());
    for (std::size_t r = 0; r < ny; ++r) {
        const double ky = static_cast<double>(r) - static_cast<double>(ny / 2);
        const cxd ph = std::polar(1.0, -2.0 * oracles::kPi * ky * static_cast<double>(d) /
                                           static_cast<double>(ny));
        for (std::size_t c = 0; c < nx; ++c) ramped(r, c) = ksp(r, c) * ph;
    }
    EXPECT_LT(rel_err(oracles::roll_rows(img, d), ifft2c(ramped)), 1e-10);
}

// ---------------------------------------------------------------------------
// CAIPIRINHA phase ramps
// ---------------------------------------------------------------------------

TEST(CaipiShift, EqualsCyclicImageShift) {
    // slice 1 with fraction 1/3 on a 9-row grid shifts the image by 3 rows.
    Rng rng(31);
    ComplexArray img = rng.cnormal_array({9, 6});
    ComplexArray shifted = caipi_shift(fft2c(img), 1, make_spec(2, 1.0 / 3.0, 1, 4));
    EXPECT_LT(rel_err(oracles::roll_rows(img, 3), ifft2c(shifted)), 1e-10);

    // 2/3 FOV on 12 rows: slice s shifts by s*8 rows.
    ComplexArray img2 = rng.cnormal_array({12, 4});
    for (std::size_t s : {0u, 1u, 2u}) {
        ComplexArray sh = caipi_shift(fft2c(img2), s, make_spec(3, 2.0 / 3.0, 1, 4));
        EXPECT_LT(rel_err(oracles::roll_rows(img2, static_cast<long>(8 * s)), ifft2c(sh)), 1e-10)
            << "slice " << s;
    }
}

TEST(CaipiShift, InvertUndoesForward) {
    Rng rng(32);
    const auto spec = make_spec(3, 2.0 / 3.0, 1, 4);
    ComplexArray ksp = rng.cnormal_array({2, 10, 6}); // multi-plane input
    ComplexArray back = caipi_shift(caipi_shift(ksp, 2, spec), 2, spec, /*invert=*/true);
    EXPECT_LT(rel_err(ksp, back), 1e-14);
    EXPECT_THROW(caipi_shift(ksp, 3, spec), ArgumentError);
}

TEST(CaipiShift, SliceZeroIsIdentity) {
    Rng rng(33);
    ComplexArray ksp = rng.cnormal_array({6, 6});
    ComplexArray out = caipi_shift(ksp, 0, make_spec(3, 2.0 / 3.0, 1, 4));
    EXPECT_EQ(out.raw(), ksp.raw());
}

// ---------------------------------------------------------------------------
// Sampling masks
// ---------------------------------------------------------------------------

TEST(Mask, UniformCombPlusCenteredAcs) {
    SamplingMask m = make_uniform_mask(12, 3, 4);
    EXPECT_EQ(m.ny, 12u);
    EXPECT_EQ(m.acs_start(), 4u);
    for (std::size_t r = 0; r < 12; ++r) {
        const bool comb = r % 3 == 0;
        const bool acs = r >= 4 && r < 8;
        EXPECT_EQ(m.line(r), comb || acs) << "row " << r;
    }
    EXPECT_EQ(m.acquired_count(), 7u);

    SamplingMask noacs = make_uniform_mask(10, 2, 0);
    EXPECT_EQ(noacs.acquired_count(), 5u);
}

TEST(Mask, ApplyZeroesUnacquiredLines) {
    Rng rng(44);
    ComplexArray ksp = rng.cnormal_array({2, 8, 4});
    SamplingMask m = make_uniform_mask(8, 4, 2);
    ComplexArray out = apply_mask(ksp, m);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t r = 0; r < 8; ++r)
            for (std::size_t x = 0; x < 4; ++x) {
                if (m.line(r))
                    EXPECT_EQ(out(c, r, x), ksp(c, r, x));
                else
                    EXPECT_EQ(out(c, r, x), cxd(0.0, 0.0));
            }
}

TEST(Mask, RejectsBadParameters) {
    EXPECT_THROW(make_uniform_mask(8, 0, 0), ArgumentError);
    EXPECT_THROW(make_uniform_mask(8, 2, 9), ArgumentError);
}

// ---------------------------------------------------------------------------
// Phantoms and coils
// ---------------------------------------------------------------------------

TEST(Phantom, FiniteNonzeroDeterministicDistinct) {
    ComplexArray a = make_phantom(32, 32, 3, 5);
    EXPECT_TRUE(all_finite(a));
    for (std::size_t s = 0; s < 3; ++s) EXPECT_GT(norm2(a.slice(s)), 0.0);

    ComplexArray b = make_phantom(32, 32, 3, 5);
    EXPECT_EQ(a.raw(), b.raw());
    ComplexArray c = make_phantom(32, 32, 3, 6);
    EXPECT_NE(a.raw(), c.raw());
    EXPECT_GT(rel_err(a.slice(0), a.slice(1)), 1e-2); // slices differ
}

TEST(Coils, RootSumOfSquaresIsOne) {
    CoilSensitivities maps = simulate_coils(16, 16, 6, 9);
    for (std::size_t r = 0; r < 16; ++r)
        for (std::size_t c = 0; c < 16; ++c) {
            double rss = 0.0;
            for (std::size_t ch = 0; ch < 6; ++ch) rss += std::norm(maps.maps(ch, r, c));
            EXPECT_NEAR(rss, 1.0, 1e-12);
        }
}

TEST(Coils, CombineIsAdjointOfExpand) {
    Rng rng(10);
    CoilSensitivities maps = simulate_coils(8, 8, 4, 2);
    ComplexArray x = rng.cnormal_array({8, 8});        // image
    ComplexArray y = rng.cnormal_array({4, 8, 8});     // coil stack
    const cxd lhs = vdot(maps.expand(x), y);           // <Ex, y>
    const cxd rhs = vdot(x, maps.combine(y));          // <x, E*y>
    EXPECT_NEAR(std::abs(lhs - rhs), 0.0, 1e-12 * std::abs(lhs));
}

// ---------------------------------------------------------------------------
// Multiband acquisition
// ---------------------------------------------------------------------------

TEST(Acquire, ShapesAndMaskZeroing) {
    const auto spec = make_spec(3, 2.0 / 3.0, 3, 8);
    ComplexArray truth = make_phantom(24, 16, 3, 77);
    CoilSensitivities maps = simulate_coils(24, 16, 4, 77);
    Acquisition acq = acquire(truth, maps, spec);

    EXPECT_EQ(acq.sms_ksp.shape(), (Shape{4, 24, 16}));
    EXPECT_EQ(acq.acs_per_slice.shape(), (Shape{3, 4, 8, 16}));
    EXPECT_EQ(acq.mask.ny, 24u);
    for (std::size_t c = 0; c < 4; ++c)
        for (std::size_t r = 0; r < 24; ++r)
            if (!acq.mask.line(r))
                for (std::size_t x = 0; x < 16; ++x) EXPECT_EQ(acq.sms_ksp(c, r, x), cxd(0, 0));
}

TEST(Acquire, CollapseIsCaipiWeightedSumAndAcsIsCentralBlock) {
    const auto spec = make_spec(2, 1.0 / 2.0, 2, 6);
    ComplexArray truth = make_phantom(16, 12, 2, 13);
    CoilSensitivities maps = simulate_coils(16, 12, 3, 13);
    Acquisition acq = acquire(truth, maps, spec);

    // Rebuild the collapsed k-space from first principles.
    ComplexArray slice_ksp({2, 3, 16, 12});
    for (std::size_t s = 0; s < 2; ++s)
        slice_ksp.set_slice(s, fft2c(maps.expand(truth.slice(s))));
    ComplexArray manual = add(caipi_shift(slice_ksp.slice(0), 0, spec),
                              caipi_shift(slice_ksp.slice(1), 1, spec));
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t r = 0; r < 16; ++r)
            if (acq.mask.line(r))
                for (std::size_t x = 0; x < 12; ++x)
                    EXPECT_LT(std::abs(acq.sms_ksp(c, r, x) - manual(c, r, x)), 1e-12);

    // ACS blocks are the unshifted central rows of each slice's k-space.
    const std::size_t start = acq.mask.acs_start();
    for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t r = 0; r < 6; ++r)
                for (std::size_t x = 0; x < 12; ++x)
                    EXPECT_EQ(acq.acs_per_slice(s, c, r, x), slice_ksp(s, c, start + r, x));
}

TEST(Acquire, NoiseIsDeterministicAndScalesCorrectly) {
    const double sigma = 0.05;
    const auto clean_spec = make_spec(2, 1.0 / 2.0, 2, 4, 0.0, 42);
    const auto noisy_spec = make_spec(2, 1.0 / 2.0, 2, 4, sigma, 42);
    ComplexArray truth = make_phantom(32, 32, 2, 3);
    CoilSensitivities maps = simulate_coils(32, 32, 4, 3);

    Acquisition clean = acquire(truth, maps, clean_spec);
    Acquisition noisy1 = acquire(truth, maps, noisy_spec);
    Acquisition noisy2 = acquire(truth, maps, noisy_spec);
    EXPECT_EQ(noisy1.sms_ksp.raw(), noisy2.sms_ksp.raw()); // same seed, same draw

    // Mean squared noise per acquired sample approximates sigma^2.
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < 4; ++c)
        for (std::size_t r = 0; r < 32; ++r)
            if (clean.mask.line(r))
                for (std::size_t x = 0; x < 32; ++x) {
                    sum += std::norm(noisy1.sms_ksp(c, r, x) - clean.sms_ksp(c, r, x));
                    ++n;
                }
    EXPECT_NEAR(sum / static_cast<double>(n), sigma * sigma, 0.15 * sigma * sigma);
}

TEST(Acquire, ValidatesInputs) {
    ComplexArray truth = make_phantom(16, 16, 2, 1);
    CoilSensitivities maps = simulate_coils(16, 16, 2, 1);
    EXPECT_THROW(acquire(truth, maps, make_spec(3, 2.0 / 3.0, 2, 4)), ShapeError);
    auto bad = make_spec(2, 1.0 / 2.0, 0, 4);
    EXPECT_THROW(acquire(truth, maps, bad), ArgumentError);
    auto too_many_acs = make_spec(2, 1.0 / 2.0, 2, 20);
    EXPECT_THROW(acquire(truth, maps, too_many_acs), ArgumentError);
    auto no_acs = make_spec(2, 1.0 / 2.0, 2, 1);
    no_acs.acs_lines = 0;
    EXPECT_THROW(acquire(truth, maps, no_acs), ArgumentError);
}
