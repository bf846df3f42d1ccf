#ifndef FBAEC_SPECTRAL_H_
#define FBAEC_SPECTRAL_H_

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "fbaec/fft.h"

namespace fbaec {

using Complex = std::complex<double>;

constexpr double kHighpassCutoffHz = 50.0;
constexpr double kWidebandLimitHz = 8000.0;

bool IsSupportedSampleRate(int sample_rate);
// Throws RangeError for anything other than 16 or 48 kHz.
void CheckSampleRate(int sample_rate);

// Mono signal in full-scale units.
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 48000;

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Throws on unsupported sample rate or non-finite samples.
void ValidateAudio(const AudioBuffer& audio);

// STFT layout. All members are derived from the sample rate; the frame spans
// 26.5 ms and the DFT is zero-padded to 32 ms.
struct FrameGrid {
  int sample_rate = 48000;
  int frame_len = 1272;
  int frame_shift = 636;
  int dft_size = 1536;
  int wb_cut_bin = 256;
  int num_onesided_bins = 769;

  static FrameGrid ForSampleRate(int sample_rate);

  double bin_hz() const { return static_cast<double>(sample_rate) / dft_size; }
  bool has_upper_band() const { return wb_cut_bin < num_onesided_bins - 1; }
  // Number of complete frames that fit in `num_samples`.
  std::int64_t NumFrames(std::size_t num_samples) const;
  // Algorithmic delay of analysis + synthesis: one frame plus one shift.
  int latency_samples() const { return frame_len + frame_shift; }
  double latency_ms() const { return 1000.0 * latency_samples() / sample_rate; }

  bool operator==(const FrameGrid&) const = default;
};

struct SpectralFrame {
  std::vector<Complex> bins;
  std::int64_t frame_index = 0;
  FrameGrid grid;
};

// Periodic Hann window with the square root taken, so that the squared
// windows at 50% overlap sum to exactly one.
std::vector<double> SqrtHannWindow(int length);

// First-order bilinear high-pass with unity gain at Nyquist. Carries state
// between calls, so one instance serves exactly one stream.
class HighpassFilter {
 public:
  explicit HighpassFilter(int sample_rate,
                          double cutoff_hz = kHighpassCutoffHz);

  double Process(double x) {
    const double y = b0_ * (x - x_prev_) + a1_ * y_prev_;
    x_prev_ = x;
    y_prev_ = y;
    return y;
  }
  void Process(std::span<const double> in, std::span<double> out);
  void Reset() { x_prev_ = y_prev_ = 0.0; }

  double b0() const { return b0_; }
  double a1() const { return a1_; }

 private:
  double b0_;
  double a1_;
  double x_prev_ = 0.0;
  double y_prev_ = 0.0;
};

AudioBuffer Highpass50Hz(const AudioBuffer& signal);

// Window + zero-pad + DFT for a single frame, and the matching inverse. Holds
// no per-stream state and may be shared across threads.
class FrameTransform {
 public:
  explicit FrameTransform(const FrameGrid& grid);

  const FrameGrid& grid() const { return grid_; }
  const std::vector<double>& window() const { return window_; }

  // `frame` holds frame_len time samples.
  SpectralFrame Forward(std::span<const double> frame,
                        std::int64_t frame_index) const;
  // Writes frame_len windowed samples ready for overlap-add.
  void Inverse(const SpectralFrame& frame, std::span<double> out) const;

 private:
  FrameGrid grid_;
  std::vector<double> window_;
  RealFft fft_;
};

// Frame l covers samples [l*shift, l*shift + frame_len). Frames are
// transformed in parallel.
std::vector<SpectralFrame> Analyze(const AudioBuffer& signal,
                                   const FrameGrid& grid);

// Overlap-add of consecutive frames. Output sample 0 corresponds to input
// sample frames.front().frame_index * shift; the length is
// (frames - 1) * shift + frame_len. Only samples covered by two frames are
// reconstructed exactly.
AudioBuffer Synthesize(std::span<const SpectralFrame> frames,
                       const FrameGrid& grid);

// Zeroes every bin above grid.wb_cut_bin.
SpectralFrame ZeroUpperBand(const SpectralFrame& frame);
void ZeroUpperBandInPlace(SpectralFrame& frame);

// Serial implementations kept as references for the parallel kernels.
namespace serial {
std::vector<SpectralFrame> Analyze(const AudioBuffer& signal,
                                   const FrameGrid& grid);
AudioBuffer Synthesize(std::span<const SpectralFrame> frames,
                       const FrameGrid& grid);
}  // namespace serial

}  // namespace fbaec

#endif  // FBAEC_SPECTRAL_H_
