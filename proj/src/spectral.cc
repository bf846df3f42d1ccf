#include "fbaec/spectral.h"

#include <cmath>
#include <numbers>
#include <string>

#include "fbaec/errors.h"

namespace fbaec {
namespace {

void CheckConsecutive(std::span<const SpectralFrame> frames,
                      const FrameGrid& grid) {
  if (frames.empty()) throw DimensionError("synthesize: no frames");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const SpectralFrame& f = frames[i];
    if (!(f.grid == grid)) {
      throw DimensionError("synthesize: frame grid mismatch");
    }
    if (static_cast<int>(f.bins.size()) != grid.num_onesided_bins) {
      throw DimensionError("synthesize: frame has wrong bin count");
    }
    if (f.frame_index != frames.front().frame_index +
                             static_cast<std::int64_t>(i)) {
      throw DimensionError("synthesize: frames are not consecutive");
    }
  }
}

void CheckAnalyzable(const AudioBuffer& signal, const FrameGrid& grid) {
  if (signal.sample_rate != grid.sample_rate) {
    throw DimensionError("analyze: grid does not match signal sample rate");
  }
  if (signal.size() < static_cast<std::size_t>(grid.frame_len)) {
    throw DimensionError("analyze: signal shorter than one frame");
  }
}

void OverlapAdd(const std::vector<double>& windowed, std::size_t num_frames,
                const FrameGrid& grid, std::vector<double>& out) {
  const std::size_t len = grid.frame_len;
  for (std::size_t f = 0; f < num_frames; ++f) {
    const double* src = windowed.data() + f * len;
    double* dst = out.data() + f * grid.frame_shift;
    for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
  }
}

}  // namespace

bool IsSupportedSampleRate(int sample_rate) {
  return sample_rate == 16000 || sample_rate == 48000;
}

void CheckSampleRate(int sample_rate) {
  if (!IsSupportedSampleRate(sample_rate)) {
    throw RangeError("unsupported sample rate " + std::to_string(sample_rate) +
                     " (expected 16000 or 48000)");
  }
}

void ValidateAudio(const AudioBuffer& audio) {
  CheckSampleRate(audio.sample_rate);
  for (double s : audio.samples) {
    if (!std::isfinite(s)) throw RangeError("audio contains non-finite sample");
  }
}

FrameGrid FrameGrid::ForSampleRate(int sample_rate) {
  CheckSampleRate(sample_rate);
  FrameGrid g;
  g.sample_rate = sample_rate;
  // 26.5 ms frames, 32 ms DFT.
  g.frame_len = sample_rate * 53 / 2000;
  g.frame_shift = g.frame_len / 2;
  g.dft_size = sample_rate * 32 / 1000;
  g.num_onesided_bins = g.dft_size / 2 + 1;
  g.wb_cut_bin = static_cast<int>(
      std::lround(kWidebandLimitHz * g.dft_size / sample_rate));
  return g;
}

std::int64_t FrameGrid::NumFrames(std::size_t num_samples) const {
  if (num_samples < static_cast<std::size_t>(frame_len)) return 0;
  return static_cast<std::int64_t>((num_samples - frame_len) / frame_shift) +
         1;
}

std::vector<double> SqrtHannWindow(int length) {
  std::vector<double> w(length);
  for (int n = 0; n < length; ++n) {
    w[n] = std::sqrt(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length));
  }
  return w;
}

HighpassFilter::HighpassFilter(int sample_rate, double cutoff_hz) {
  CheckSampleRate(sample_rate);
  const double k = std::tan(std::numbers::pi * cutoff_hz / sample_rate);
  b0_ = 1.0 / (1.0 + k);
  a1_ = (1.0 - k) / (1.0 + k);
}

void HighpassFilter::Process(std::span<const double> in,
                             std::span<double> out) {
  if (in.size() != out.size()) {
    throw DimensionError("HighpassFilter: buffer size mismatch");
  }
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = Process(in[i]);
}

AudioBuffer Highpass50Hz(const AudioBuffer& signal) {
  HighpassFilter hpf(signal.sample_rate);
  AudioBuffer out{std::vector<double>(signal.size()), signal.sample_rate};
  hpf.Process(signal.samples, out.samples);
  return out;
}

FrameTransform::FrameTransform(const FrameGrid& grid)
    : grid_(grid),
      window_(SqrtHannWindow(grid.frame_len)),
      fft_(grid.dft_size) {}

SpectralFrame FrameTransform::Forward(std::span<const double> frame,
                                      std::int64_t frame_index) const {
  if (static_cast<int>(frame.size()) != grid_.frame_len) {
    throw DimensionError("FrameTransform::Forward: wrong frame length");
  }
  std::vector<double> padded(grid_.dft_size, 0.0);
  for (int n = 0; n < grid_.frame_len; ++n) padded[n] = frame[n] * window_[n];
  SpectralFrame out;
  out.bins.resize(grid_.num_onesided_bins);
  out.frame_index = frame_index;
  out.grid = grid_;
  fft_.Forward(padded, out.bins);
  out.bins.front().imag(0.0);
  out.bins.back().imag(0.0);
  return out;
}

void FrameTransform::Inverse(const SpectralFrame& frame,
                             std::span<double> out) const {
  if (static_cast<int>(frame.bins.size()) != grid_.num_onesided_bins ||
      static_cast<int>(out.size()) != grid_.frame_len) {
    throw DimensionError("FrameTransform::Inverse: size mismatch");
  }
  std::vector<double> time(grid_.dft_size);
  fft_.Inverse(frame.bins, time);
  for (int n = 0; n < grid_.frame_len; ++n) out[n] = time[n] * window_[n];
}

std::vector<SpectralFrame> Analyze(const AudioBuffer& signal,
                                   const FrameGrid& grid) {
  CheckAnalyzable(signal, grid);
  const FrameTransform transform(grid);
  const std::int64_t num_frames = grid.NumFrames(signal.size());
  std::vector<SpectralFrame> frames(num_frames);
#pragma omp parallel for schedule(static)
  for (std::int64_t l = 0; l < num_frames; ++l) {
    std::span<const double> segment(signal.samples.data() + l * grid.frame_shift,
                                    grid.frame_len);
    frames[l] = transform.Forward(segment, l);
  }
  return frames;
}

AudioBuffer Synthesize(std::span<const SpectralFrame> frames,
                       const FrameGrid& grid) {
  CheckConsecutive(frames, grid);
  const FrameTransform transform(grid);
  const std::int64_t num_frames = static_cast<std::int64_t>(frames.size());
  std::vector<double> windowed(num_frames * grid.frame_len);
#pragma omp parallel for schedule(static)
  for (std::int64_t l = 0; l < num_frames; ++l) {
    transform.Inverse(frames[l],
                      std::span<double>(windowed.data() + l * grid.frame_len,
                                        grid.frame_len));
  }
  AudioBuffer out;
  out.sample_rate = grid.sample_rate;
  out.samples.assign((num_frames - 1) * grid.frame_shift + grid.frame_len, 0.0);
  // Accumulation stays serial and in frame order so the result does not
  // depend on the thread count.
  OverlapAdd(windowed, num_frames, grid, out.samples);
  return out;
}

void ZeroUpperBandInPlace(SpectralFrame& frame) {
  for (std::size_t k = frame.grid.wb_cut_bin + 1; k < frame.bins.size(); ++k) {
    frame.bins[k] = Complex(0.0, 0.0);
  }
}

SpectralFrame ZeroUpperBand(const SpectralFrame& frame) {
  SpectralFrame out = frame;
  ZeroUpperBandInPlace(out);
  return out;
}

namespace serial {

std::vector<SpectralFrame> Analyze(const AudioBuffer& signal,
                                   const FrameGrid& grid) {
  CheckAnalyzable(signal, grid);
  const FrameTransform transform(grid);
  const std::int64_t num_frames = grid.NumFrames(signal.size());
  std::vector<SpectralFrame> frames;
  frames.reserve(num_frames);
  for (std::int64_t l = 0; l < num_frames; ++l) {
    std::span<const double> segment(signal.samples.data() + l * grid.frame_shift,
                                    grid.frame_len);
    frames.push_back(transform.Forward(segment, l));
  }
  return frames;
}

AudioBuffer Synthesize(std::span<const SpectralFrame> frames,
                       const FrameGrid& grid) {
  CheckConsecutive(frames, grid);
  const FrameTransform transform(grid);
  const std::size_t num_frames = frames.size();
  std::vector<double> windowed(num_frames * grid.frame_len);
  for (std::size_t l = 0; l < num_frames; ++l) {
    transform.Inverse(frames[l],
                      std::span<double>(windowed.data() + l * grid.frame_len,
                                        grid.frame_len));
  }
  AudioBuffer out;
  out.sample_rate = grid.sample_rate;
  out.samples.assign((num_frames - 1) * grid.frame_shift + grid.frame_len, 0.0);
  OverlapAdd(windowed, num_frames, grid, out.samples);
  return out;
}

}  // namespace serial
}  // namespace fbaec
