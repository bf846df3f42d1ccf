#ifndef FBAEC_DDC_H_
#define FBAEC_DDC_H_

#include <cstdint>
#include <deque>
#include <future>
#include <optional>
#include <span>
#include <vector>

#include "fbaec/fft.h"
#include "fbaec/spectral.h"

namespace fbaec {

// Dynamic delay compensation settings. Defaults are the 48 kHz values; use
// ForSampleRate() for other rates.
struct DdcConfig {
  int sample_rate = 48000;
  int frame_len = 50880;    // 1.06 s
  int frame_shift = 12720;  // 25% of frame_len
  double smoothing = 0.7;
  double band_lo_hz = 200.0;
  double band_hi_hz = 8000.0;
  int stability_frames = 2;
  double backoff_ms = 200.0;
  int stability_tol = 48;  // 1 ms
  // Lag search range and reference history depth.
  int max_delay = 48000;
  // Run the GCC-PHAT estimate on a worker thread. Results are identical
  // either way; only wall-clock overlap changes.
  bool concurrent = true;

  static DdcConfig ForSampleRate(int sample_rate);

  int backoff_samples() const;
  // Restricted bin range [first, last] of the frame_len-point DFT.
  int band_first_bin() const;
  int band_last_bin() const;
  void Validate() const;
};

struct DelayState {
  // Smoothed cross-power spectrum over bins band_first_bin..band_last_bin.
  std::vector<Complex> phi;
  int tau_inst = 0;
  int tau_active = 0;
  std::optional<int> previous_tau_inst;
  // tau_inst value that produced the current tau_active.
  std::optional<int> active_basis;
  int stable_count = 0;
  std::int64_t frame_index = -1;

  static DelayState Fresh(const DdcConfig& cfg);
};

// Smoothed GCC-PHAT over long frames.
class GccPhatEstimator {
 public:
  explicit GccPhatEstimator(const DdcConfig& cfg);

  // Updates state.phi and state.tau_inst from one pair of frame_len frames
  // and returns the new instantaneous delay in samples.
  int Estimate(DelayState& state, std::span<const double> mic_frame,
               std::span<const double> ref_frame) const;

  // Same as Estimate, touching only `phi`. Used by DelayCompensator so a
  // worker thread never shares the rest of DelayState with the caller.
  int EstimateFromPhi(std::vector<Complex>& phi,
                      std::span<const double> mic_frame,
                      std::span<const double> ref_frame) const;

  // Phase-transformed cross-correlation for `phi` (length frame_len,
  // circular lags).
  std::vector<double> Correlation(std::span<const Complex> phi) const;

  const DdcConfig& config() const { return cfg_; }

 private:
  DdcConfig cfg_;
  RealFft fft_;
};

// Stability-gated back-off rule. Call once per freshly estimated tau_inst.
void UpdateActiveDelay(DelayState& state, const DdcConfig& cfg);

// Single-writer/single-reader history of the far-end signal.
class ReferenceRingbuffer {
 public:
  explicit ReferenceRingbuffer(int capacity);

  int capacity() const { return static_cast<int>(data_.size()); }
  std::int64_t samples_written() const { return written_; }

  void Write(double x);
  // Sample written `delay` samples before the most recent one; zero before
  // stream start. Throws RangeError if delay >= capacity.
  double Read(int delay) const;

 private:
  std::vector<double> data_;
  std::int64_t written_ = 0;
};

// Writes every input sample and returns the stream delayed by tau.
std::vector<double> AlignReference(ReferenceRingbuffer& buffer, int tau,
                                   std::span<const double> input);

struct DelayTraceEntry {
  std::int64_t ddc_frame = 0;
  // Sample count at which the frame was complete and at which its estimate
  // became effective.
  std::int64_t frame_end = 0;
  std::int64_t effective_at = 0;
  int tau_inst = 0;
  int tau_active = 0;
};

// Streaming delay compensator. Consumes raw mic and far-end samples, runs an
// estimate every frame_shift samples once a full frame is buffered, and
// publishes each result one frame_shift after its frame completes.
class DelayCompensator {
 public:
  explicit DelayCompensator(const DdcConfig& cfg);
  ~DelayCompensator();
  DelayCompensator(const DelayCompensator&) = delete;
  DelayCompensator& operator=(const DelayCompensator&) = delete;

  void Push(double mic, double ref);
  // Applies every pending estimate whose effective time is <= sample_count.
  void AdvanceTo(std::int64_t sample_count);

  int active_delay() const { return state_.tau_active; }
  const DelayState& state() const { return state_; }
  const std::vector<DelayTraceEntry>& trace() const { return trace_; }

 private:
  struct Pending {
    std::int64_t ddc_frame;
    std::int64_t frame_end;
    std::int64_t effective_at;
    std::future<int> result;
    std::optional<int> value;
  };

  void Launch();
  void Wait(Pending& pending);

  DdcConfig cfg_;
  GccPhatEstimator estimator_;
  DelayState state_;
  std::vector<double> mic_history_;
  std::vector<double> ref_history_;
  // Written only by the estimate in flight; copied to state_.phi once it
  // completes.
  std::vector<Complex> working_phi_;
  std::int64_t samples_seen_ = 0;
  std::int64_t frames_launched_ = 0;
  std::deque<Pending> pending_;
  std::vector<DelayTraceEntry> trace_;
};

}  // namespace fbaec

#endif  // FBAEC_DDC_H_
