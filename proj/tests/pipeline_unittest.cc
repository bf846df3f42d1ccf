#include "fbaec/pipeline.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "fbaec/errors.h"
#include "fbaec/wav_io.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace fbaec {
namespace {

PipelineConfig NoDdc(int sample_rate = 48000) {
  PipelineConfig cfg = PipelineConfig::Defaults(sample_rate);
  cfg.ddc.reset();
  return cfg;
}

// High-pass, analysis, upper band zeroed, synthesis; aligned to the input.
std::vector<double> ComposedIdentity(const AudioBuffer& mic, const FrameGrid& grid) {
  AudioBuffer padded = mic;
  padded.samples.resize(mic.size() + grid.latency_samples(), 0.0);
  std::vector<SpectralFrame> frames = Analyze(Highpass50Hz(padded), grid);
  for (SpectralFrame& f : frames) ZeroUpperBandInPlace(f);
  AudioBuffer y = Synthesize(frames, grid);
  y.samples.resize(mic.size());
  return y.samples;
}

TEST(Pipeline, LatencyIsOneFramePlusOneShift) {
  const FrameGrid g48 = FrameGrid::ForSampleRate(48000);
  EXPECT_EQ(g48.latency_samples(), 1908);
  EXPECT_DOUBLE_EQ(g48.latency_ms(), 39.75);
  const FrameGrid g16 = FrameGrid::ForSampleRate(16000);
  EXPECT_EQ(g16.latency_samples(), 636);
  EXPECT_DOUBLE_EQ(g16.latency_ms(), 39.75);
}

TEST(Pipeline, ImpulseEmergesAfterLatency) {
  const PipelineConfig cfg = PipelineConfig::Defaults(48000);
  for (int n0 : {4000, 5000, 7777}) {
    std::vector<double> mic(16000, 0.0);
    const std::vector<double> far(16000, 0.0);
    mic[n0] = 1.0;
    StreamSession session = MakeSession(cfg);
    std::vector<double> out = session.Process(mic, far);
    ASSERT_EQ(out.size(), mic.size());
    const auto peak = std::max_element(out.begin(), out.end(),
        [](double a, double b) { return std::abs(a) < std::abs(b); });
    const int at = static_cast<int>(peak - out.begin());
    EXPECT_LE(std::abs(at - (n0 + 1908)), 1) << "n0=" << n0;
  }
}

TEST(Pipeline, IdentityPathMatchesComposition) {
  const AudioBuffer mic = test::RandomAudio(1, 48000);
  const AudioBuffer far = test::RandomAudio(2, 48000);
  for (bool with_ddc : {false, true}) {
    PipelineConfig cfg = PipelineConfig::Defaults(48000);
    if (!with_ddc) cfg.ddc.reset();
    const ProcessResult r = ProcessStream(cfg, mic, far);
    const std::vector<double> expected = ComposedIdentity(mic, cfg.grid);
    ASSERT_EQ(r.output.size(), expected.size());
    double err = 0.0;
    for (std::size_t n = 0; n < expected.size(); ++n) {
      err = std::max(err, std::abs(r.output.samples[n] - expected[n]));
    }
    EXPECT_LT(err, 1e-9);
  }
}

TEST(Pipeline, BypassedStagesMatchIdentity) {
  const AudioBuffer mic = test::RandomAudio(3, 30000);
  const AudioBuffer far = test::RandomAudio(4, 30000);
  PipelineConfig bypass = NoDdc();
  bypass.aec = EstimatorChoice::Parse("none");
  bypass.pf = EstimatorChoice::Parse("none");
  const ProcessResult a = ProcessStream(bypass, mic, far);
  const ProcessResult b = ProcessStream(NoDdc(), mic, far);
  for (std::size_t n = 0; n < a.output.size(); ++n) {
    ASSERT_NEAR(a.output.samples[n], b.output.samples[n], 1e-9);
  }
}

TEST(Pipeline, ConstantGainScalesOutput) {
  const AudioBuffer mic = test::RandomAudio(5, 30000);
  const AudioBuffer far = test::RandomAudio(6, 30000);
  PipelineConfig cfg = NoDdc();
  cfg.aec = EstimatorChoice::Parse("constant:0.5");
  cfg.pf = EstimatorChoice::Parse("constant:0.5");
  const ProcessResult scaled = ProcessStream(cfg, mic, far);
  cfg.aec = cfg.pf = EstimatorChoice::Parse("none");
  const ProcessResult plain = ProcessStream(cfg, mic, far);
  for (std::size_t n = 0; n < plain.output.size(); ++n) {
    ASSERT_NEAR(scaled.output.samples[n], 0.25 * plain.output.samples[n], 1e-12);
  }
}

TEST(Pipeline, StreamingMatchesWholeBuffer) {
  const AudioBuffer mic = test::RandomAudio(7, 70000);
  const AudioBuffer far = test::RandomAudio(8, 70000);
  PipelineConfig cfg = PipelineConfig::Defaults(48000);
  cfg.aec = EstimatorChoice::Parse("constant:0.7");

  StreamSession ref_session = MakeSession(cfg);
  std::vector<double> whole = ref_session.Process(mic.samples, far.samples);
  std::vector<double> tail = ref_session.Flush();
  whole.insert(whole.end(), tail.begin(), tail.end());

  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    std::uniform_int_distribution<std::size_t> chunk(1, 5000);
    StreamSession session = MakeSession(cfg);
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < mic.size()) {
      const std::size_t n = std::min(chunk(rng), mic.size() - pos);
      const std::vector<double> part = session.Process(
          std::span<const double>(mic.samples).subspan(pos, n),
          std::span<const double>(far.samples).subspan(pos, n));
      ASSERT_EQ(part.size(), n);
      out.insert(out.end(), part.begin(), part.end());
      pos += n;
    }
    tail = session.Flush();
    out.insert(out.end(), tail.begin(), tail.end());
    EXPECT_EQ(out, whole) << "trial " << trial;
  }
}

TEST(Pipeline, SixteenKilohertz) {
  const AudioBuffer mic = test::RandomAudio(10, 20000, 16000);
  const AudioBuffer far = test::RandomAudio(11, 20000, 16000);
  PipelineConfig cfg = PipelineConfig::Defaults(16000);
  const ProcessResult r = ProcessStream(cfg, mic, far);
  EXPECT_EQ(r.latency_samples, 636);
  const std::vector<double> expected = ComposedIdentity(mic, cfg.grid);
  for (std::size_t n = 0; n < expected.size(); ++n) {
    ASSERT_NEAR(r.output.samples[n], expected[n], 1e-9);
  }
}

TEST(Pipeline, TraceRecordsEveryFrame) {
  const AudioBuffer mic = test::RandomAudio(12, 20000);
  PipelineConfig cfg = NoDdc();
  cfg.emit_mask_trace = true;
  cfg.emit_output_spectra = true;
  const ProcessResult r = ProcessStream(cfg, mic, mic);
  const std::size_t frames = static_cast<std::size_t>(
      cfg.grid.NumFrames(mic.size() + cfg.grid.latency_samples()));
  EXPECT_EQ(r.trace.masks.size(), frames);
  EXPECT_EQ(r.trace.output_spectra.size(), frames);
  EXPECT_EQ(r.trace.frame_delays.size(), frames);
  for (std::size_t l = 0; l < frames; ++l) {
    EXPECT_EQ(r.trace.masks[l].frame_index, static_cast<std::int64_t>(l));
  }
}

TEST(Pipeline, TruncatesToShorterInput) {
  const AudioBuffer mic = test::RandomAudio(13, 20000);
  const AudioBuffer far = test::RandomAudio(14, 20500);
  const ProcessResult r = ProcessStream(NoDdc(), mic, far);
  EXPECT_EQ(r.output.size(), 20000u);
  EXPECT_EQ(r.dropped_samples, 500u);
  const AudioBuffer far_long = test::RandomAudio(14, 22000);
  EXPECT_THROW(ProcessStream(NoDdc(), mic, far_long), DimensionError);
}

TEST(Pipeline, RejectsBadInput) {
  AudioBuffer mic = test::RandomAudio(15, 5000);
  mic.samples[100] = std::nan("");
  EXPECT_THROW(ProcessStream(NoDdc(), mic, mic), RangeError);
  const AudioBuffer mic16 = test::RandomAudio(16, 5000, 16000);
  EXPECT_THROW(ProcessStream(NoDdc(), mic16, mic16), RangeError);

  StreamSession session = MakeSession(NoDdc());
  const std::vector<double> a(10, 0.0), b(11, 0.0);
  EXPECT_THROW(session.Process(a, b), DimensionError);
}

TEST(Pipeline, OracleNeedsGroundTruth) {
  PipelineConfig cfg = NoDdc();
  cfg.aec = EstimatorChoice::Parse("oracle");
  EXPECT_THROW(MakeSession(cfg), RangeError);
}

TEST(PipelineConfig, BweRequiresWidebandGridAndWeights) {
  PipelineConfig cfg = PipelineConfig::Defaults(16000);
  cfg.bwe_enabled = true;
  cfg.bwe_weights = std::make_shared<BweWeights>(BweWeights::Zeros());
  EXPECT_THROW(cfg.Validate(), RangeError);
  PipelineConfig wb = PipelineConfig::Defaults(48000);
  wb.bwe_enabled = true;
  EXPECT_ANY_THROW(wb.Validate());
  wb.bwe_weights = std::make_shared<BweWeights>(BweWeights::Zeros());
  EXPECT_NO_THROW(wb.Validate());
}

TEST(PipelineConfig, ZeroWeightBweFillsUpperBand) {
  const AudioBuffer mic = test::RandomAudio(17, 20000);
  PipelineConfig cfg = NoDdc();
  cfg.bwe_enabled = true;
  cfg.bwe_weights = std::make_shared<BweWeights>(BweWeights::Zeros());
  cfg.emit_output_spectra = true;
  const ProcessResult r = ProcessStream(cfg, mic, mic);
  ASSERT_FALSE(r.trace.gammas.empty());
  bool any_ub = false;
  for (const SpectralFrame& f : r.trace.output_spectra) {
    double p_wb = 0.0, p_ub = 0.0;
    for (int k = 0; k <= 256; ++k) p_wb += std::norm(f.bins[k]);
    for (int k = 257; k < 769; ++k) p_ub += std::norm(f.bins[k]);
    p_wb /= 257.0;
    p_ub /= 512.0;
    EXPECT_LE(p_ub, 0.01 * p_wb + 1e-9);
    any_ub = any_ub || p_ub > 0.0;
  }
  EXPECT_TRUE(any_ub);
}

TEST(PipelineConfig, ParsesTextAndRejectsUnknownKeys) {
  const auto entries = ParseConfigText(
      "# comment\n"
      "sample_rate = 48000\n"
      "ddc = off   # trailing\n"
      "\n"
      "aec_estimator = constant:0.25\n"
      "pf_estimator = none\n");
  PipelineConfig cfg = PipelineConfig::Defaults(48000);
  ApplyConfigEntries(entries, cfg);
  EXPECT_FALSE(cfg.ddc.has_value());
  EXPECT_EQ(cfg.aec.kind, EstimatorKind::kConstant);
  EXPECT_DOUBLE_EQ(cfg.aec.gain, 0.25);
  EXPECT_EQ(cfg.pf.kind, EstimatorKind::kNone);

  EXPECT_THROW(ApplyConfigEntries({{"frobnicate", "1"}}, cfg), FormatError);
  EXPECT_THROW(ParseConfigText("no equals sign\n"), FormatError);
  EXPECT_THROW(ApplyConfigEntries({{"ddc", "maybe"}}, cfg), FormatError);
}

TEST(PipelineConfig, DdcKeysReachTheDelayConfig) {
  PipelineConfig cfg = PipelineConfig::Defaults(48000);
  ApplyConfigEntries({{"ddc_smoothing", "0.5"}, {"ddc_backoff_ms", "100"}}, cfg);
  ASSERT_TRUE(cfg.ddc.has_value());
  EXPECT_DOUBLE_EQ(cfg.ddc->smoothing, 0.5);
  EXPECT_EQ(cfg.ddc->backoff_samples(), 4800);
}

TEST(PipelineConfig, DigestIsStableAndSensitive) {
  const PipelineConfig a = PipelineConfig::Defaults(48000);
  const PipelineConfig b = PipelineConfig::Defaults(48000);
  EXPECT_EQ(a.Digest(), b.Digest());
  EXPECT_EQ(a.Digest().size(), 8u);
  PipelineConfig c = a;
  c.aec = EstimatorChoice::Parse("oracle");
  EXPECT_NE(a.Digest(), c.Digest());
  PipelineConfig d = a;
  d.ddc.reset();
  EXPECT_NE(a.Digest(), d.Digest());
  EXPECT_NE(a.Digest(), PipelineConfig::Defaults(16000).Digest());
}

TEST(EstimatorChoice, ParsesAndPrints) {
  for (const char* text : {"none", "identity", "oracle", "constant:0.5"}) {
    EXPECT_EQ(EstimatorChoice::Parse(text).ToString(), text);
  }
  EXPECT_THROW(EstimatorChoice::Parse("constant:1.5"), RangeError);
  EXPECT_THROW(EstimatorChoice::Parse("constant:-0.1"), RangeError);
  EXPECT_THROW(EstimatorChoice::Parse("constant:abc"), FormatError);
  EXPECT_THROW(EstimatorChoice::Parse("neural"), FormatError);
}

class WavTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("fbaec_wav_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(WavTest, Float32RoundTripIsExactForFloats) {
  AudioBuffer a = test::RandomAudio(18, 1000, 16000);
  for (double& v : a.samples) v = static_cast<float>(v);
  WriteWav(dir_ / "a.wav", a, WavFormat::kFloat32);
  const AudioBuffer b = ReadWav(dir_ / "a.wav");
  EXPECT_EQ(b.sample_rate, 16000);
  EXPECT_EQ(b.samples, a.samples);
}

TEST_F(WavTest, Pcm16Quantizes) {
  AudioBuffer a{{0.0, 0.5, -0.5, 1.0, -1.0, 0.123456}, 48000};
  WriteWav(dir_ / "p.wav", a, WavFormat::kPcm16);
  const AudioBuffer b = ReadWav(dir_ / "p.wav");
  ASSERT_EQ(b.size(), a.size());
  EXPECT_EQ(b.samples[1], 0.5);
  EXPECT_EQ(b.samples[2], -0.5);
  EXPECT_EQ(b.samples[3], 32767.0 / 32768.0);
  EXPECT_EQ(b.samples[4], -1.0);
  EXPECT_EQ(b.samples[5], std::round(0.123456 * 32768.0) / 32768.0);
}

TEST_F(WavTest, RejectsGarbage) {
  const auto path = dir_ / "bad.wav";
  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("this is not a wav file at all, not even close", f);
    std::fclose(f);
  }
  EXPECT_THROW(ReadWav(path), FormatError);
  EXPECT_THROW(ReadWav(dir_ / "missing.wav"), Error);
}

}  // namespace
}  // namespace fbaec
