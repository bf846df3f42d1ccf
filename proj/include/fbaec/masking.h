#ifndef FBAEC_MASKING_H_
#define FBAEC_MASKING_H_

#include <cstdint>
#include <optional>
#include <vector>

#include "fbaec/spectral.h"

namespace fbaec {

// Complex mask over wideband bins 0..wb_cut_bin. The magnitude is the
// uncompressed value; ApplyMask maps it through tanh.
struct ComplexMask {
  std::vector<Complex> values;
  std::int64_t frame_index = 0;
};

// Magnitude that tanh maps to 1.0 in double precision; used as the
// passthrough mask.
constexpr double kIdentityMaskMagnitude = 50.0;
// Oracle masks never request more than this gain.
constexpr double kOracleMaxGain = 1.0 - 1e-6;

// out(k) = in(k) * tanh(|M(k)|) * M(k)/|M(k)| for k <= wb_cut_bin, zero above.
// A zero mask entry yields a zero output bin.
SpectralFrame ApplyMask(const SpectralFrame& frame, const ComplexMask& mask);

ComplexMask ConstantMask(const FrameGrid& grid, std::int64_t frame_index,
                         Complex value);

// Mask that maps `observed` onto `target` through ApplyMask, with the gain
// clipped to kOracleMaxGain.
ComplexMask OracleMask(const SpectralFrame& observed,
                       const SpectralFrame& target);

// Echo cancellation stage: mic spectrum Y and aligned reference X in, mask M
// out. Implementations are stateful and serve a single stream.
class AecEstimator {
 public:
  virtual ~AecEstimator() = default;
  virtual ComplexMask Estimate(const SpectralFrame& mic,
                               const SpectralFrame& reference) = 0;
};

// Postfilter stage: echo-reduced spectrum E and the AEC mask M in, mask G out.
class PostfilterEstimator {
 public:
  virtual ~PostfilterEstimator() = default;
  virtual ComplexMask Estimate(const SpectralFrame& echo_reduced,
                               const ComplexMask& aec_mask) = 0;
};

// Grid and length checks around the estimator calls.
ComplexMask AecEstimate(AecEstimator& estimator, const SpectralFrame& mic,
                        const SpectralFrame& reference);
ComplexMask PfEstimate(PostfilterEstimator& estimator,
                       const SpectralFrame& echo_reduced,
                       const ComplexMask& aec_mask);

// Emits the same complex value for every bin. With kIdentityMaskMagnitude it
// is a passthrough; with atanh(g) it is a fixed gain g.
class ConstantMaskEstimator final : public AecEstimator,
                                    public PostfilterEstimator {
 public:
  explicit ConstantMaskEstimator(Complex value) : value_(value) {}

  ComplexMask Estimate(const SpectralFrame& mic,
                       const SpectralFrame& reference) override;
  ComplexMask Estimate(const SpectralFrame& echo_reduced,
                       const ComplexMask& aec_mask) override;

 private:
  Complex value_;
};

// Computes OracleMask against precomputed target frames, looked up by frame
// index. For the AEC stage the target is speech + noise, for the postfilter
// it is speech alone.
class OracleMaskEstimator final : public AecEstimator,
                                  public PostfilterEstimator {
 public:
  explicit OracleMaskEstimator(std::vector<SpectralFrame> targets);

  ComplexMask Estimate(const SpectralFrame& mic,
                       const SpectralFrame& reference) override;
  ComplexMask Estimate(const SpectralFrame& echo_reduced,
                       const ComplexMask& aec_mask) override;

 private:
  const SpectralFrame& TargetFor(const SpectralFrame& observed) const;

  std::vector<SpectralFrame> targets_;
};

// Per-frame masks recorded by the pipeline. A disabled stage leaves its
// entry empty.
struct MaskTraceEntry {
  std::int64_t frame_index = 0;
  std::optional<ComplexMask> aec;
  std::optional<ComplexMask> pf;
};
using MaskTrace = std::vector<MaskTraceEntry>;

}  // namespace fbaec

#endif  // FBAEC_MASKING_H_
