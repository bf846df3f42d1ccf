#ifndef FBAEC_EVALKIT_H_
#define FBAEC_EVALKIT_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fbaec/masking.h"
#include "fbaec/pipeline.h"
#include "fbaec/spectral.h"
#include "json.hpp"

namespace fbaec {

constexpr double kErleCapDb = 100.0;

// Seeded description of one synthetic test condition.
struct ScenarioSpec {
  std::uint64_t seed = 1;
  double ser_db = 0.0;    // [-10, 10]
  double snr_db = 20.0;   // [0, 40]
  double delay_ms = 100.0;  // [0, 500]
  int echo_fir_len = 2048;
  // Per-sample amplitude decay of the echo tail; <= 0 selects a 100 ms
  // (60 dB) tail.
  double echo_decay = 0.0;
  // Symmetric hard clip of the far-end before the echo path.
  std::optional<double> clip_level = 0.8;
  double duration_s = 10.0;
  int sample_rate = 48000;
  // Optional abrupt echo delay change.
  std::optional<double> jump_at_s;
  double jump_delay_ms = 0.0;

  void Validate() const;
  double EffectiveDecay() const;
  nlohmann::json ToJson() const;
  static ScenarioSpec FromJson(const nlohmann::json& j);
};

struct ScenarioComponents {
  AudioBuffer mic;
  AudioBuffer nearend;
  AudioBuffer echo;
  AudioBuffer noise;
  AudioBuffer farend;
  int true_delay = 0;
  // Delay after the jump, equal to true_delay without one.
  int true_delay_after_jump = 0;
  std::int64_t jump_sample = -1;
};

// Voiced-speech-like test signal: glottal pulse trains with drifting pitch
// through random formant resonators, in syllables separated by pauses.
AudioBuffer SpeechLikeSignal(std::uint64_t seed, double duration_s,
                             int sample_rate);
// Two talkers taking turns with occasional interruptions (double talk) and
// mutual silences.
using ConversationPair = std::pair<AudioBuffer, AudioBuffer>;
ConversationPair SpeechLikeConversation(std::uint64_t seed, double duration_s,
                                        int sample_rate);
AudioBuffer WhiteNoise(std::uint64_t seed, double duration_s, int sample_rate);

// Exponentially decaying random FIR with a unit direct path at tap 0.
std::vector<double> EchoPathFir(const ScenarioSpec& spec);

// Linear convolution truncated to the input length.
std::vector<double> Convolve(std::span<const double> signal,
                             std::span<const double> fir);

ScenarioComponents GenerateScenario(const ScenarioSpec& spec,
                                    const AudioBuffer& nearend_src,
                                    const AudioBuffer& farend_src,
                                    const AudioBuffer& noise_src);
// Near-end and far-end from SpeechLikeConversation, noise from WhiteNoise,
// all seeded from spec.seed.
ScenarioComponents GenerateSyntheticScenario(const ScenarioSpec& spec);

// Runs `signal` alone through the mic path with the recorded masks:
// high-pass, analysis, upper band zeroed, AEC and PF masks, synthesis.
// The output is latency-compensated and has the input length.
AudioBuffer ShadowProcess(const AudioBuffer& signal, const MaskTrace& trace,
                          const FrameGrid& grid);
// Same path with no masks; the reference the black-box metrics compare to.
AudioBuffer WidebandReference(const AudioBuffer& signal, const FrameGrid& grid);

struct BlackBoxMetrics {
  double erle_db = 0.0;
  double snr_in_db = 0.0;
  double snr_out_db = 0.0;
  double delta_snr_db = 0.0;
  // ERLE over consecutive frame-shift blocks of the evaluation region.
  std::vector<double> block_erle_db;
};

// Samples [frame_len, N - frame_len) are evaluated.
double ErleBb(const ScenarioComponents& components, const MaskTrace& trace,
              const FrameGrid& grid);
double DeltaSnrBb(const ScenarioComponents& components, const MaskTrace& trace,
                  const FrameGrid& grid);
BlackBoxMetrics EvaluateBlackBox(const ScenarioComponents& components,
                                 const MaskTrace& trace, const FrameGrid& grid);

struct EvaluationReport {
  ScenarioSpec spec;
  BlackBoxMetrics metrics;
  std::string config_digest;
  int latency_samples = 0;
  double latency_ms = 0.0;
};

// Generates the scenario, runs the pipeline on it (oracle estimators get the
// true components) and computes the black-box metrics.
EvaluationReport RunEvaluation(const ScenarioSpec& spec,
                               const PipelineConfig& cfg);
// Scenarios are evaluated in parallel.
std::vector<EvaluationReport> RunEvaluations(std::span<const ScenarioSpec> specs,
                                             const PipelineConfig& cfg);

nlohmann::json ReportToJson(const EvaluationReport& report);
// "block,erle_db" rows.
std::string BlockErleCsv(const BlackBoxMetrics& metrics);

}  // namespace fbaec

#endif  // FBAEC_EVALKIT_H_
