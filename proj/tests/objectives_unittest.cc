#include "fbaec/objectives.h"

#include <cmath>
#include <random>
#include <vector>

#include "fbaec/errors.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace fbaec {
namespace {

constexpr double kTol = 1e-12;

// Reference implementations written out component by component.
double NaiveMse(const std::vector<Complex>& a, const std::vector<Complex>& b,
                double norm) {
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double dr = a[k].real() - b[k].real();
    const double di = a[k].imag() - b[k].imag();
    sum += dr * dr + di * di;
  }
  return sum / norm;
}

double NaiveCompressedMag(const Complex& x, double c, double floor) {
  const double m = std::hypot(x.real(), x.imag());
  return std::exp(c * std::log(m > floor ? m : floor));
}

Complex NaiveCompressed(const Complex& x, double c, double floor) {
  const double m = std::hypot(x.real(), x.imag());
  const double cm = NaiveCompressedMag(x, c, floor);
  if (m == 0.0) return Complex(cm, 0.0);
  const double phase = std::atan2(x.imag(), x.real());
  return Complex(cm * std::cos(phase), cm * std::sin(phase));
}

double NaiveMc(const std::vector<Complex>& a, const std::vector<Complex>& b,
               double c, double floor) {
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = NaiveCompressedMag(a[k], c, floor) -
                     NaiveCompressedMag(b[k], c, floor);
    sum += d * d;
  }
  return sum / a.size();
}

double NaiveCc(const std::vector<Complex>& a, const std::vector<Complex>& b,
               double c, double floor) {
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const Complex d = NaiveCompressed(a[k], c, floor) - NaiveCompressed(b[k], c, floor);
    sum += d.real() * d.real() + d.imag() * d.imag();
  }
  return sum / a.size();
}

double NaiveBwe(const std::vector<double>& est, const std::vector<double>& ref,
                double factor) {
  double sum = 0.0;
  for (std::size_t k = 0; k < est.size(); ++k) {
    const double w = est[k] > ref[k] ? factor * factor : 1.0;
    sum += w * (est[k] - ref[k]) * (est[k] - ref[k]);
  }
  return sum / est.size();
}

std::vector<SpectralFrame> RandomFrames(std::mt19937_64& rng, int count) {
  std::vector<SpectralFrame> frames(count);
  for (int l = 0; l < count; ++l) {
    frames[l].grid = FrameGrid::ForSampleRate(48000);
    frames[l].frame_index = l;
    frames[l].bins = test::RandomBins(rng, frames[l].grid.num_onesided_bins);
  }
  return frames;
}

TEST(MseSpectral, MatchesLoopOracle) {
  std::mt19937_64 rng(1);
  for (std::size_t n : {1u, 7u, 257u, 1024u}) {
    const auto a = test::RandomBins(rng, n);
    const auto b = test::RandomBins(rng, n);
    EXPECT_LT(test::RelativeError(MseSpectral(a, b), NaiveMse(a, b, n)), kTol);
    EXPECT_LT(test::RelativeError(MseSpectral(a, b, 3.0), NaiveMse(a, b, 3.0)), kTol);
    EXPECT_EQ(MseSpectral(a, b), MseSpectral(b, a));
  }
}

TEST(MseSpectral, Examples) {
  std::vector<Complex> a(257, Complex(0.5, -1.0));
  std::vector<Complex> b = a;
  EXPECT_EQ(MseSpectral(a, b), 0.0);
  b[17] += Complex(0.0, 2.0);
  EXPECT_DOUBLE_EQ(MseSpectral(a, b), 4.0 / 257.0);
  b.pop_back();
  EXPECT_THROW(MseSpectral(a, b), DimensionError);
}

TEST(SequenceSpectralLoss, AveragesFrames) {
  std::mt19937_64 rng(2);
  const auto est = RandomFrames(rng, 5);
  const auto tgt = RandomFrames(rng, 5);
  double expected = 0.0;
  for (int l = 0; l < 5; ++l) {
    std::vector<Complex> a(est[l].bins.begin(), est[l].bins.begin() + 257);
    std::vector<Complex> b(tgt[l].bins.begin(), tgt[l].bins.begin() + 257);
    expected += NaiveMse(a, b, 257);
  }
  expected /= 5;
  EXPECT_LT(test::RelativeError(SequenceSpectralLoss(est, tgt, 257), expected), kTol);
  EXPECT_EQ(SequenceSpectralLoss(est, est), 0.0);
  EXPECT_THROW(SequenceSpectralLoss(std::vector<SpectralFrame>{},
                                    std::vector<SpectralFrame>{}),
               DimensionError);
}

TEST(SequenceSpectralLoss, TwoFramesWithLossesOneAndThree) {
  std::vector<SpectralFrame> est(2), tgt(2);
  for (int l = 0; l < 2; ++l) {
    est[l].bins = {Complex(0.0, 0.0)};
    tgt[l].bins = {Complex(l == 0 ? 1.0 : std::sqrt(3.0), 0.0)};
  }
  EXPECT_DOUBLE_EQ(SequenceSpectralLoss(est, tgt), 2.0);
}

TEST(JointLoss, WeightsStages) {
  EXPECT_EQ(JointLoss(4.0, 0.0, 0.25), 1.0);
  EXPECT_EQ(JointLoss(0.0, 4.0, 0.25), 3.0);
}

TEST(TimeLogMse, MatchesDirectFormula) {
  std::mt19937_64 rng(3);
  const auto a = test::RandomVector(rng, 1000);
  const auto b = test::RandomVector(rng, 1000);
  double sum = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) sum += (a[n] - b[n]) * (a[n] - b[n]);
  const double expected = 10.0 * std::log10(1e-12 + sum / a.size());
  EXPECT_LT(test::RelativeError(TimeLogMse(a, b, 1e-12), expected), 1e-12);
}

TEST(TimeLogMse, Examples) {
  const std::vector<double> a(100, 0.3);
  EXPECT_DOUBLE_EQ(TimeLogMse(a, a, 1e-12), 10.0 * std::log10(1e-12));
  const std::vector<double> b(100, 1.3);
  EXPECT_NEAR(TimeLogMse(a, b, 1e-12), 0.0, 1e-9);
}

TEST(CompressedLosses, MatchLoopOracles) {
  std::mt19937_64 rng(4);
  const LossConfig cfg;
  for (std::size_t n : {1u, 64u, 257u, 1024u}) {
    auto a = test::RandomBins(rng, n);
    auto b = test::RandomBins(rng, n);
    a[0] = 0.0;  // floor and zero-phase convention
    b[n - 1] *= 1e-12;
    EXPECT_LT(test::RelativeError(MagnitudeCompressedLoss(a, b, cfg),
                                  NaiveMc(a, b, 0.3, 1e-10)),
              kTol);
    EXPECT_LT(test::RelativeError(ComplexCompressedLoss(a, b, cfg),
                                  NaiveCc(a, b, 0.3, 1e-10)),
              kTol);
  }
}

TEST(CompressedLosses, UnitExponentReducesToMse) {
  std::mt19937_64 rng(5);
  LossConfig cfg;
  cfg.compress_exp = 1.0;
  const auto a = test::RandomBins(rng, 300);
  const auto b = test::RandomBins(rng, 300);
  EXPECT_LT(test::RelativeError(ComplexCompressedLoss(a, b, cfg), MseSpectral(a, b)),
            kTol);
}

TEST(CompressedLosses, PhaseOnlyDifference) {
  std::mt19937_64 rng(6);
  const LossConfig cfg;
  const auto a = test::RandomBins(rng, 100);
  std::vector<Complex> b(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) b[k] = a[k] * std::polar(1.0, 0.7);
  EXPECT_NEAR(MagnitudeCompressedLoss(a, b, cfg), 0.0, 1e-20);
  EXPECT_GT(ComplexCompressedLoss(a, b, cfg), 0.0);
}

TEST(CompressedLosses, SequenceAggregationIsLogOfMean) {
  std::mt19937_64 rng(7);
  const LossConfig cfg;
  const auto est = RandomFrames(rng, 4);
  const auto tgt = RandomFrames(rng, 4);
  double mc = 0.0, cc = 0.0;
  for (int l = 0; l < 4; ++l) {
    mc += NaiveMc(est[l].bins, tgt[l].bins, 0.3, 1e-10);
    cc += NaiveCc(est[l].bins, tgt[l].bins, 0.3, 1e-10);
  }
  EXPECT_LT(test::RelativeError(SequenceMagnitudeCompressedLoss(est, tgt, cfg),
                                10.0 * std::log10(1e-12 + mc / 4)),
            kTol);
  EXPECT_LT(test::RelativeError(SequenceComplexCompressedLoss(est, tgt, cfg),
                                10.0 * std::log10(1e-12 + cc / 4)),
            kTol);
  EXPECT_DOUBLE_EQ(SequenceComplexCompressedLoss(est, est, cfg),
                   10.0 * std::log10(1e-12));
  EXPECT_DOUBLE_EQ(SequenceMagnitudeCompressedLoss(est, est, cfg),
                   10.0 * std::log10(1e-12));
}

TEST(McCLoss, Mixing) {
  EXPECT_EQ(McCLoss(10.0, 0.0, 0.7), 3.0);
  EXPECT_NEAR(McCLoss(1.5, 4.0, 0.7), 0.3 * 1.5 + 0.7 * 4.0, 1e-15);
  EXPECT_EQ(McCLoss(2.0, 5.0, 0.0), 2.0);
  EXPECT_EQ(McCLoss(2.0, 5.0, 1.0), 5.0);
}

TEST(BweLoss, SingleBinExamples) {
  EXPECT_EQ(BweFrameLoss(std::vector<double>{2.0}, std::vector<double>{1.0}, 2.0), 4.0);
  EXPECT_EQ(BweFrameLoss(std::vector<double>{0.0}, std::vector<double>{1.0}, 2.0), 1.0);
  const std::vector<double> v(512, 0.5);
  EXPECT_EQ(BweFrameLoss(v, v, 2.0), 0.0);
}

TEST(BweLoss, MatchesLoopOracle) {
  std::mt19937_64 rng(8);
  const LossConfig cfg;
  std::vector<std::vector<double>> est, ref;
  double total = 0.0;
  for (int l = 0; l < 6; ++l) {
    est.push_back(test::RandomVector(rng, 512, 0.0, 1.0));
    ref.push_back(test::RandomVector(rng, 512, 0.0, 1.0));
    const double frame = NaiveBwe(est.back(), ref.back(), 2.0);
    EXPECT_LT(test::RelativeError(BweFrameLoss(est.back(), ref.back(), 2.0), frame),
              kTol);
    total += frame;
  }
  EXPECT_LT(test::RelativeError(SequenceBweLoss(est, ref, cfg),
                                10.0 * std::log10(1e-12 + total / 6)),
            kTol);
}

TEST(LossConfig, Validation) {
  LossConfig cfg;
  EXPECT_NO_THROW(cfg.Validate());
  cfg.compress_exp = 0.0;
  EXPECT_THROW(cfg.Validate(), RangeError);
  cfg = LossConfig{};
  cfg.alpha_joint = 1.5;
  EXPECT_THROW(cfg.Validate(), RangeError);
}

TEST(LossProperties, NonNegativeAndZeroOnlyForEqualInputs) {
  std::mt19937_64 rng(9);
  const LossConfig cfg;
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = test::RandomBins(rng, 64);
    auto b = a;
    EXPECT_EQ(MagnitudeCompressedLoss(a, b, cfg), 0.0);
    EXPECT_EQ(ComplexCompressedLoss(a, b, cfg), 0.0);
    b[trial % 64] += Complex(0.1, 0.0);
    EXPECT_GT(MseSpectral(a, b), 0.0);
    EXPECT_GT(ComplexCompressedLoss(a, b, cfg), 0.0);
  }
}

}  // namespace
}  // namespace fbaec
