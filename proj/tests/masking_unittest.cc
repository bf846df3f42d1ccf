#include "fbaec/masking.h"

#include <cmath>
#include <numbers>
#include <random>

#include "fbaec/errors.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace fbaec {
namespace {

SpectralFrame RandomWidebandFrame(std::mt19937_64& rng, std::int64_t index = 0) {
  SpectralFrame f;
  f.grid = FrameGrid::ForSampleRate(48000);
  f.frame_index = index;
  f.bins = test::RandomBins(rng, f.grid.num_onesided_bins);
  ZeroUpperBandInPlace(f);
  return f;
}

SpectralFrame UnitFrame() {
  SpectralFrame f;
  f.grid = FrameGrid::ForSampleRate(48000);
  f.bins.assign(f.grid.num_onesided_bins, Complex(0.0, 0.0));
  for (int k = 0; k <= f.grid.wb_cut_bin; ++k) f.bins[k] = Complex(1.0, 0.0);
  return f;
}

TEST(ApplyMask, LargeRealMaskPassesThrough) {
  std::mt19937_64 rng(1);
  const SpectralFrame in = RandomWidebandFrame(rng);
  const SpectralFrame out =
      ApplyMask(in, ConstantMask(in.grid, 0, kIdentityMaskMagnitude));
  for (std::size_t k = 0; k < in.bins.size(); ++k) {
    EXPECT_NEAR(std::abs(out.bins[k] - in.bins[k]), 0.0, 1e-8);
  }
}

TEST(ApplyMask, ZeroMaskGivesZero) {
  std::mt19937_64 rng(2);
  const SpectralFrame in = RandomWidebandFrame(rng);
  const SpectralFrame out = ApplyMask(in, ConstantMask(in.grid, 0, 0.0));
  for (const Complex& b : out.bins) EXPECT_EQ(b, Complex(0.0, 0.0));
}

TEST(ApplyMask, QuarterTurnHalfGain) {
  const Complex m = std::polar(std::atanh(0.5), std::numbers::pi / 2.0);
  EXPECT_NEAR(m.imag(), 0.5493061443340549, 1e-15);
  const SpectralFrame out = ApplyMask(UnitFrame(), ConstantMask(UnitFrame().grid, 0, m));
  EXPECT_NEAR(out.bins[10].real(), 0.0, 1e-14);
  EXPECT_NEAR(out.bins[10].imag(), 0.5, 1e-14);
}

TEST(ApplyMask, UpperBandStaysZero) {
  std::mt19937_64 rng(3);
  SpectralFrame in = RandomWidebandFrame(rng);
  in.bins = test::RandomBins(rng, in.bins.size());  // fullband content
  const SpectralFrame out =
      ApplyMask(in, ConstantMask(in.grid, 0, kIdentityMaskMagnitude));
  for (int k = in.grid.wb_cut_bin + 1; k < in.grid.num_onesided_bins; ++k) {
    EXPECT_EQ(out.bins[k], Complex(0.0, 0.0));
  }
}

TEST(ApplyMask, RejectsLengthMismatch) {
  const SpectralFrame in = UnitFrame();
  ComplexMask mask = ConstantMask(in.grid, 0, 1.0);
  mask.values.pop_back();
  EXPECT_THROW(ApplyMask(in, mask), DimensionError);
}

TEST(ApplyMask, NeverAmplifies) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> mag(0.0, 60.0);
  std::uniform_real_distribution<double> phase(-std::numbers::pi, std::numbers::pi);
  SpectralFrame in = RandomWidebandFrame(rng);
  for (int trial = 0; trial < 400; ++trial) {
    in.bins = test::RandomBins(rng, in.bins.size(), std::pow(10.0, trial % 7 - 3));
    ComplexMask mask = ConstantMask(in.grid, 0, 0.0);
    for (Complex& m : mask.values) m = std::polar(mag(rng), phase(rng));
    const SpectralFrame out = ApplyMask(in, mask);
    for (std::size_t k = 0; k < mask.values.size(); ++k) {
      ASSERT_LE(std::abs(out.bins[k]), std::abs(in.bins[k]));
    }
  }
}

TEST(ApplyMask, AddsMaskPhase) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> mag(0.01, 5.0);
  std::uniform_real_distribution<double> phase(-3.0, 3.0);
  const SpectralFrame in = RandomWidebandFrame(rng);
  ComplexMask mask = ConstantMask(in.grid, 0, 0.0);
  for (Complex& m : mask.values) m = std::polar(mag(rng), phase(rng));
  const SpectralFrame out = ApplyMask(in, mask);
  for (std::size_t k = 0; k < mask.values.size(); ++k) {
    const Complex expected_dir = in.bins[k] * mask.values[k];
    const double diff = std::arg(out.bins[k] / expected_dir);
    EXPECT_NEAR(diff, 0.0, 1e-12);
  }
}

TEST(ApplyMask, MagnitudeIncreasesWithMaskMagnitude) {
  std::mt19937_64 rng(6);
  const SpectralFrame in = RandomWidebandFrame(rng);
  for (double phi : {0.0, 1.0, -2.5}) {
    double previous = -1.0;
    for (double r = 0.05; r < 6.0; r += 0.05) {
      const SpectralFrame out =
          ApplyMask(in, ConstantMask(in.grid, 0, std::polar(r, phi)));
      const double mag = std::abs(out.bins[7]);
      EXPECT_GT(mag, previous);
      EXPECT_LE(mag, std::abs(in.bins[7]));
      previous = mag;
    }
  }
}

TEST(ApplyMask, IdentityTwiceEqualsOnce) {
  std::mt19937_64 rng(7);
  const SpectralFrame in = RandomWidebandFrame(rng);
  const ComplexMask id = ConstantMask(in.grid, 0, kIdentityMaskMagnitude);
  const SpectralFrame once = ApplyMask(in, id);
  const SpectralFrame twice = ApplyMask(once, id);
  for (std::size_t k = 0; k < in.bins.size(); ++k) {
    EXPECT_NEAR(std::abs(twice.bins[k] - once.bins[k]), 0.0, 1e-8);
  }
}

TEST(OracleMask, MapsObservedOntoSmallerTarget) {
  std::mt19937_64 rng(8);
  const SpectralFrame y = RandomWidebandFrame(rng);
  SpectralFrame t = y;
  for (std::size_t k = 0; k < t.bins.size(); ++k) {
    t.bins[k] *= std::polar(0.3 + 0.5 * std::sin(k * 1.0), 0.1 * k);
  }
  const SpectralFrame out = ApplyMask(y, OracleMask(y, t));
  for (int k = 0; k <= y.grid.wb_cut_bin; ++k) {
    EXPECT_NEAR(std::abs(out.bins[k] - t.bins[k]), 0.0,
                1e-9 * std::max(1.0, std::abs(t.bins[k])));
  }
}

TEST(OracleMask, ClipsGainBelowOne) {
  const SpectralFrame y = UnitFrame();
  SpectralFrame t = y;
  for (Complex& b : t.bins) b *= 3.0;
  const ComplexMask m = OracleMask(y, t);
  const SpectralFrame out = ApplyMask(y, m);
  EXPECT_NEAR(std::abs(out.bins[3]), kOracleMaxGain, 1e-12);
  EXPECT_LE(std::abs(out.bins[3]), 1.0);
}

TEST(OracleMask, ZeroTargetGivesZeroMask) {
  const SpectralFrame y = UnitFrame();
  SpectralFrame t = y;
  for (Complex& b : t.bins) b = 0.0;
  for (const Complex& m : OracleMask(y, t).values) EXPECT_EQ(m, Complex(0.0, 0.0));
}

TEST(Estimators, IdentityConstantPassesThrough) {
  std::mt19937_64 rng(9);
  const SpectralFrame y = RandomWidebandFrame(rng);
  ConstantMaskEstimator est(kIdentityMaskMagnitude);
  const ComplexMask m = AecEstimate(est, y, y);
  const SpectralFrame e = ApplyMask(y, m);
  const SpectralFrame out = ApplyMask(e, PfEstimate(est, e, m));
  for (std::size_t k = 0; k < y.bins.size(); ++k) {
    EXPECT_NEAR(std::abs(out.bins[k] - y.bins[k]), 0.0, 1e-8);
  }
}

TEST(Estimators, ConstantAttenuationHalvesSpectrum) {
  std::mt19937_64 rng(10);
  const SpectralFrame e = RandomWidebandFrame(rng);
  ConstantMaskEstimator est(std::atanh(0.5));
  const ComplexMask g =
      PfEstimate(est, e, ConstantMask(e.grid, 0, kIdentityMaskMagnitude));
  const SpectralFrame out = ApplyMask(e, g);
  for (std::size_t k = 0; k < e.bins.size(); ++k) {
    EXPECT_NEAR(std::abs(out.bins[k] - 0.5 * e.bins[k]), 0.0, 1e-14);
  }
}

TEST(Estimators, OracleWithoutEchoReturnsInput) {
  std::mt19937_64 rng(11);
  std::vector<SpectralFrame> targets;
  for (int l = 0; l < 3; ++l) targets.push_back(RandomWidebandFrame(rng, l));
  OracleMaskEstimator est(targets);
  for (const SpectralFrame& y : targets) {
    const SpectralFrame out = ApplyMask(y, AecEstimate(est, y, y));
    for (std::size_t k = 0; k < y.bins.size(); ++k) {
      EXPECT_NEAR(std::abs(out.bins[k] - y.bins[k]), 0.0,
                  2e-6 * std::abs(y.bins[k]) + 1e-15);
    }
  }
}

TEST(Estimators, OracleOnNoiseOnlyNeverAddsEnergy) {
  std::mt19937_64 rng(12);
  std::vector<SpectralFrame> targets;
  std::vector<SpectralFrame> noisy;
  for (int l = 0; l < 4; ++l) {
    SpectralFrame n = RandomWidebandFrame(rng, l);
    SpectralFrame t = n;
    for (Complex& b : t.bins) b *= 0.0;
    targets.push_back(t);
    noisy.push_back(n);
  }
  OracleMaskEstimator est(targets);
  for (const SpectralFrame& n : noisy) {
    const SpectralFrame out =
        ApplyMask(n, PfEstimate(est, n, ConstantMask(n.grid, n.frame_index, 50.0)));
    double e_in = 0.0, e_out = 0.0;
    for (std::size_t k = 0; k < n.bins.size(); ++k) {
      e_in += std::norm(n.bins[k]);
      e_out += std::norm(out.bins[k]);
    }
    EXPECT_LE(e_out, e_in);
  }
}

TEST(Estimators, OracleRejectsMissingFrames) {
  std::mt19937_64 rng(13);
  std::vector<SpectralFrame> targets{RandomWidebandFrame(rng, 0),
                                     RandomWidebandFrame(rng, 2)};
  EXPECT_THROW(OracleMaskEstimator{targets}, DimensionError);
  OracleMaskEstimator est({RandomWidebandFrame(rng, 0)});
  const SpectralFrame late = RandomWidebandFrame(rng, 5);
  EXPECT_THROW(AecEstimate(est, late, late), DimensionError);
}

TEST(Estimators, RejectsGridMismatch) {
  std::mt19937_64 rng(14);
  const SpectralFrame y = RandomWidebandFrame(rng);
  SpectralFrame x;
  x.grid = FrameGrid::ForSampleRate(16000);
  x.bins.assign(x.grid.num_onesided_bins, 0.0);
  ConstantMaskEstimator est(1.0);
  EXPECT_THROW(AecEstimate(est, y, x), DimensionError);
}

}  // namespace
}  // namespace fbaec
