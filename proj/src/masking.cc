#include "fbaec/masking.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fbaec/errors.h"

namespace fbaec {
namespace {

std::size_t WidebandBins(const FrameGrid& grid) {
  return static_cast<std::size_t>(grid.wb_cut_bin) + 1;
}

void CheckMaskFor(const SpectralFrame& frame, const ComplexMask& mask) {
  if (mask.values.size() != WidebandBins(frame.grid)) {
    throw DimensionError("mask length " + std::to_string(mask.values.size()) +
                         " does not match wideband bin count " +
                         std::to_string(WidebandBins(frame.grid)));
  }
}

void CheckFrame(const SpectralFrame& frame) {
  if (static_cast<int>(frame.bins.size()) != frame.grid.num_onesided_bins) {
    throw DimensionError("frame bin count does not match its grid");
  }
}

}  // namespace

constexpr double kRoundingMargin =
    1.0 - 16.0 * std::numeric_limits<double>::epsilon();

SpectralFrame ApplyMask(const SpectralFrame& frame, const ComplexMask& mask) {
  CheckFrame(frame);
  CheckMaskFor(frame, mask);
  SpectralFrame out;
  out.frame_index = frame.frame_index;
  out.grid = frame.grid;
  out.bins.assign(frame.bins.size(), Complex(0.0, 0.0));
  for (std::size_t k = 0; k < mask.values.size(); ++k) {
    const Complex m = mask.values[k];
    const double mag = std::abs(m);
    if (mag == 0.0) continue;
    // Shrunk by a few ulps so rounding can never lift |out| above |in|.
    const double gain = std::tanh(mag) * kRoundingMargin;
    out.bins[k] = frame.bins[k] * ((gain / mag) * m);
  }
  return out;
}

ComplexMask ConstantMask(const FrameGrid& grid, std::int64_t frame_index,
                         Complex value) {
  return ComplexMask{std::vector<Complex>(WidebandBins(grid), value),
                     frame_index};
}

ComplexMask OracleMask(const SpectralFrame& observed,
                       const SpectralFrame& target) {
  CheckFrame(observed);
  CheckFrame(target);
  if (!(observed.grid == target.grid)) {
    throw DimensionError("oracle: grid mismatch");
  }
  ComplexMask mask;
  mask.frame_index = observed.frame_index;
  mask.values.resize(WidebandBins(observed.grid));
  for (std::size_t k = 0; k < mask.values.size(); ++k) {
    const double obs = std::abs(observed.bins[k]);
    const double tgt = std::abs(target.bins[k]);
    double gain = 0.0;
    if (obs > 0.0) {
      gain = std::min(kOracleMaxGain, tgt / obs);
    } else if (tgt > 0.0) {
      gain = kOracleMaxGain;
    }
    if (gain == 0.0) {
      mask.values[k] = Complex(0.0, 0.0);
      continue;
    }
    const double phase = std::arg(target.bins[k]) - std::arg(observed.bins[k]);
    mask.values[k] = std::polar(std::atanh(gain), phase);
  }
  return mask;
}

ComplexMask AecEstimate(AecEstimator& estimator, const SpectralFrame& mic,
                        const SpectralFrame& reference) {
  CheckFrame(mic);
  CheckFrame(reference);
  if (!(mic.grid == reference.grid)) {
    throw DimensionError("aec_estimate: mic and reference grids differ");
  }
  ComplexMask mask = estimator.Estimate(mic, reference);
  CheckMaskFor(mic, mask);
  return mask;
}

ComplexMask PfEstimate(PostfilterEstimator& estimator,
                       const SpectralFrame& echo_reduced,
                       const ComplexMask& aec_mask) {
  CheckFrame(echo_reduced);
  CheckMaskFor(echo_reduced, aec_mask);
  ComplexMask mask = estimator.Estimate(echo_reduced, aec_mask);
  CheckMaskFor(echo_reduced, mask);
  return mask;
}

ComplexMask ConstantMaskEstimator::Estimate(const SpectralFrame& mic,
                                            const SpectralFrame&) {
  return ConstantMask(mic.grid, mic.frame_index, value_);
}

ComplexMask ConstantMaskEstimator::Estimate(const SpectralFrame& echo_reduced,
                                            const ComplexMask&) {
  return ConstantMask(echo_reduced.grid, echo_reduced.frame_index, value_);
}

OracleMaskEstimator::OracleMaskEstimator(std::vector<SpectralFrame> targets)
    : targets_(std::move(targets)) {
  for (std::size_t i = 0; i < targets_.size(); ++i) {
    if (targets_[i].frame_index != static_cast<std::int64_t>(i)) {
      throw DimensionError("oracle: target frames must start at 0 and be "
                           "consecutive");
    }
  }
}

const SpectralFrame& OracleMaskEstimator::TargetFor(
    const SpectralFrame& observed) const {
  if (observed.frame_index < 0 ||
      observed.frame_index >= static_cast<std::int64_t>(targets_.size())) {
    throw DimensionError("oracle: no target for frame " +
                         std::to_string(observed.frame_index));
  }
  return targets_[observed.frame_index];
}

ComplexMask OracleMaskEstimator::Estimate(const SpectralFrame& mic,
                                          const SpectralFrame&) {
  return OracleMask(mic, TargetFor(mic));
}

ComplexMask OracleMaskEstimator::Estimate(const SpectralFrame& echo_reduced,
                                          const ComplexMask&) {
  return OracleMask(echo_reduced, TargetFor(echo_reduced));
}

}  // namespace fbaec
