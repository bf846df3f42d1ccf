#ifndef FBAEC_PIPELINE_H_
#define FBAEC_PIPELINE_H_

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fbaec/bwe.h"
#include "fbaec/ddc.h"
#include "fbaec/masking.h"
#include "fbaec/spectral.h"

namespace fbaec {

enum class EstimatorKind { kNone, kIdentity, kConstant, kOracle };

// "none" bypasses the stage, "identity" passes through, "constant:<g>"
// applies the real gain g in (0, 1), "oracle" needs ground-truth components.
struct EstimatorChoice {
  EstimatorKind kind = EstimatorKind::kIdentity;
  double gain = 1.0;  // kConstant only

  static EstimatorChoice Parse(const std::string& text);
  std::string ToString() const;
  bool enabled() const { return kind != EstimatorKind::kNone; }
};

struct PipelineConfig {
  int sample_rate = 48000;
  FrameGrid grid;
  std::optional<DdcConfig> ddc;
  EstimatorChoice aec;
  EstimatorChoice pf;
  bool bwe_enabled = false;
  std::string bwe_weights_path;
  // In-memory weights; take precedence over bwe_weights_path.
  std::shared_ptr<const BweWeights> bwe_weights;
  bool emit_mask_trace = false;
  // Keeps every output spectrum (after BWE) in the trace.
  bool emit_output_spectra = false;

  // Defaults: DDC on, identity estimators, BWE off until weights are
  // supplied.
  static PipelineConfig Defaults(int sample_rate);

  void Validate() const;
  // Stable key=value rendering of every setting that affects the output.
  std::string Canonical() const;
  // CRC-32 of Canonical(), hex.
  std::string Digest() const;
};

// Flat "key = value" text with '#' comments.
std::map<std::string, std::string> ParseConfigText(const std::string& text);
// Applies recognised keys; throws FormatError on unknown keys or bad values.
void ApplyConfigEntries(const std::map<std::string, std::string>& entries,
                        PipelineConfig& cfg);
PipelineConfig LoadPipelineConfig(const std::string& path);

struct PipelineTrace {
  MaskTrace masks;
  std::vector<DelayTraceEntry> delays;
  std::vector<double> gammas;
  std::vector<SpectralFrame> output_spectra;
  // Active delay in effect for each processed frame.
  std::vector<int> frame_delays;
};

// Ground-truth signals for oracle estimators, aligned with the mic input.
struct OracleSignals {
  AudioBuffer aec_target;  // near-end speech + noise
  AudioBuffer pf_target;   // near-end speech
};

// Builds target frames the way the pipeline sees the mic: high-pass,
// analysis, upper band zeroed. `padded_len` extends the signal with zeros.
std::vector<SpectralFrame> OracleTargetFrames(const AudioBuffer& signal,
                                              const FrameGrid& grid,
                                              std::size_t padded_len);

// Per-stream processing state. Samples go in as pairs of (mic, far-end);
// every input sample yields one output sample, delayed by
// latency_samples().
class StreamSession {
 public:
  StreamSession(const PipelineConfig& cfg,
                std::unique_ptr<AecEstimator> aec,
                std::unique_ptr<PostfilterEstimator> pf,
                std::shared_ptr<const BweWeights> bwe_weights);

  std::vector<double> Process(std::span<const double> mic,
                              std::span<const double> farend);
  // Feeds latency_samples() zeros and returns the remaining output.
  std::vector<double> Flush();

  int latency_samples() const { return cfg_.grid.latency_samples(); }
  std::int64_t frames_processed() const { return frame_index_; }
  const PipelineTrace& trace() const { return trace_; }
  PipelineTrace TakeTrace();

 private:
  void PushSample(double mic, double far, std::vector<double>& out);
  void ProcessFrame();

  PipelineConfig cfg_;
  FrameTransform transform_;
  std::unique_ptr<AecEstimator> aec_;
  std::unique_ptr<PostfilterEstimator> pf_;
  std::shared_ptr<const BweWeights> bwe_;
  std::unique_ptr<DelayCompensator> ddc_;
  std::unique_ptr<ReferenceRingbuffer> ring_;
  HighpassFilter mic_hpf_;
  HighpassFilter ref_hpf_;
  int active_delay_ = 0;

  std::vector<double> mic_frame_;
  std::vector<double> ref_frame_;
  int frame_fill_ = 0;
  std::int64_t samples_in_ = 0;
  std::int64_t frame_index_ = 0;
  std::vector<double> ola_;
  std::vector<double> synth_scratch_;
  std::deque<double> output_fifo_;
  PipelineTrace trace_;
};

struct ProcessResult {
  // Latency-compensated output, same length as the processed input.
  AudioBuffer output;
  PipelineTrace trace;
  int latency_samples = 0;
  double latency_ms = 0.0;
  // Samples dropped from the longer input.
  std::size_t dropped_samples = 0;
};

// Builds the estimators and BWE weights named by `cfg`. Oracle estimators
// need `oracle`.
StreamSession MakeSession(const PipelineConfig& cfg,
                          const OracleSignals* oracle = nullptr,
                          std::size_t oracle_len = 0);

// Whole-buffer convenience around StreamSession. The shorter input defines
// the processed length; inputs may differ by at most one frame.
ProcessResult ProcessStream(const PipelineConfig& cfg, const AudioBuffer& mic,
                            const AudioBuffer& farend,
                            const OracleSignals* oracle = nullptr);

}  // namespace fbaec

#endif  // FBAEC_PIPELINE_H_
