#include "fbaec/evalkit.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <random>
#include <sstream>

#include "fbaec/errors.h"
#include "fbaec/fft.h"

namespace fbaec {
namespace {

// Distinct generator streams per (seed, purpose).
std::mt19937_64 MakeRng(std::uint64_t seed, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return std::mt19937_64(seq);
}

std::size_t SampleCount(double duration_s, int sample_rate) {
  return static_cast<std::size_t>(std::llround(duration_s * sample_rate));
}

int NextFastSize(int n) {
  for (int m = n;; ++m) {
    int r = m;
    for (int p : {2, 3, 5}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

double Energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

double EnergyDb(double num, double den) {
  return 10.0 * std::log10(num / den);
}

// Two-pole resonator with unity peak gain, used for formants.
struct Resonator {
  double a1 = 0.0, a2 = 0.0, gain = 0.0;
  double y1 = 0.0, y2 = 0.0;

  void Tune(double freq_hz, double bandwidth_hz, int fs) {
    const double r = std::exp(-std::numbers::pi * bandwidth_hz / fs);
    a1 = 2.0 * r * std::cos(2.0 * std::numbers::pi * freq_hz / fs);
    a2 = -r * r;
    gain = 1.0 - r;
  }
  double Process(double x) {
    const double y = gain * x + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

struct Region {
  std::size_t begin;
  std::size_t end;
};

Region EvaluationRegion(std::size_t n, const FrameGrid& grid) {
  const std::size_t margin = grid.frame_len;
  if (n <= 2 * margin + grid.frame_shift) {
    throw DimensionError("metrics: signal too short for an evaluation region");
  }
  return {margin, n - margin};
}

std::span<const double> Slice(const AudioBuffer& a, Region r) {
  return std::span<const double>(a.samples.data() + r.begin, r.end - r.begin);
}

AudioBuffer Sum(const AudioBuffer& a, const AudioBuffer& b) {
  AudioBuffer out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.samples[i] += b.samples[i];
  return out;
}

double CappedErle(double reference_energy, double residual_energy) {
  if (residual_energy <= 0.0) return kErleCapDb;
  return std::min(kErleCapDb, EnergyDb(reference_energy, residual_energy));
}

}  // namespace

void ScenarioSpec::Validate() const {
  CheckSampleRate(sample_rate);
  if (!(ser_db >= -10.0 && ser_db <= 10.0)) {
    throw RangeError("scenario: ser_db must lie in [-10, 10]");
  }
  if (!(snr_db >= 0.0 && snr_db <= 40.0)) {
    throw RangeError("scenario: snr_db must lie in [0, 40]");
  }
  if (!(delay_ms >= 0.0 && delay_ms <= 500.0)) {
    throw RangeError("scenario: delay_ms must lie in [0, 500]");
  }
  if (echo_fir_len < 1) throw RangeError("scenario: echo_fir_len must be >= 1");
  if (echo_decay >= 1.0) throw RangeError("scenario: echo_decay must be < 1");
  if (clip_level && !(*clip_level > 0.0 && *clip_level <= 1.0)) {
    throw RangeError("scenario: clip_level must lie in (0, 1]");
  }
  if (!(duration_s > 0.0)) throw RangeError("scenario: duration must be > 0");
  if (jump_at_s) {
    if (!(*jump_at_s > 0.0 && *jump_at_s < duration_s)) {
      throw RangeError("scenario: jump time must lie inside the scenario");
    }
    if (!(jump_delay_ms >= 0.0 && jump_delay_ms <= 500.0)) {
      throw RangeError("scenario: jump_delay_ms must lie in [0, 500]");
    }
  }
}

double ScenarioSpec::EffectiveDecay() const {
  if (echo_decay > 0.0) return echo_decay;
  // 60 dB down after 100 ms.
  return std::pow(10.0, -3.0 / (0.1 * sample_rate));
}

nlohmann::json ScenarioSpec::ToJson() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["ser_db"] = ser_db;
  j["snr_db"] = snr_db;
  j["delay_ms"] = delay_ms;
  j["echo_fir_len"] = echo_fir_len;
  j["echo_decay"] = EffectiveDecay();
  j["clip_level"] = clip_level ? nlohmann::json(*clip_level) : nlohmann::json();
  j["duration_s"] = duration_s;
  j["sample_rate"] = sample_rate;
  if (jump_at_s) {
    j["jump_at_s"] = *jump_at_s;
    j["jump_delay_ms"] = jump_delay_ms;
  }
  return j;
}

ScenarioSpec ScenarioSpec::FromJson(const nlohmann::json& j) {
  ScenarioSpec s;
  s.seed = j.value("seed", s.seed);
  s.ser_db = j.value("ser_db", s.ser_db);
  s.snr_db = j.value("snr_db", s.snr_db);
  s.delay_ms = j.value("delay_ms", s.delay_ms);
  s.echo_fir_len = j.value("echo_fir_len", s.echo_fir_len);
  s.echo_decay = j.value("echo_decay", s.echo_decay);
  if (j.contains("clip_level")) {
    s.clip_level = j["clip_level"].is_null()
                       ? std::nullopt
                       : std::optional<double>(j["clip_level"].get<double>());
  }
  s.duration_s = j.value("duration_s", s.duration_s);
  s.sample_rate = j.value("sample_rate", s.sample_rate);
  if (j.contains("jump_at_s")) {
    s.jump_at_s = j["jump_at_s"].get<double>();
    s.jump_delay_ms = j.value("jump_delay_ms", 0.0);
  }
  s.Validate();
  return s;
}

namespace {

using Uniform = std::uniform_real_distribution<double>;

// Voiced syllables filling [begin, end) of `out`, with a per-talker pitch.
void RenderTalkspurt(std::mt19937_64& rng, double base_f0, std::size_t begin,
                     std::size_t end, int sample_rate,
                     std::vector<double>& out) {
  auto uniform = [&rng](double lo, double hi) { return Uniform(lo, hi)(rng); };
  const double fs = sample_rate;
  // Glottal source tilt, about -6 dB/octave above a few hundred Hz.
  const double tilt = std::exp(-2.0 * std::numbers::pi * 300.0 / fs);
  double f0 = base_f0 * uniform(0.95, 1.05);
  double pulse_phase = 0.0;
  double source = 0.0;
  Resonator formants[3];
  std::size_t t = begin;
  while (t < end) {
    const std::size_t syllable =
        std::min(end - t, static_cast<std::size_t>(uniform(0.12, 0.3) * fs));
    formants[0].Tune(uniform(300.0, 900.0), uniform(60.0, 120.0), sample_rate);
    formants[1].Tune(uniform(900.0, 2400.0), uniform(80.0, 160.0), sample_rate);
    formants[2].Tune(uniform(2400.0, 3800.0), uniform(120.0, 220.0), sample_rate);
    const double f0_end = base_f0 * uniform(0.9, 1.1);
    // Syllable levels spread over 15 dB, as in running speech.
    const double level = std::pow(10.0, uniform(-15.0, 0.0) / 20.0);
    for (std::size_t i = 0; i < syllable; ++i) {
      const double progress = static_cast<double>(i) / syllable;
      pulse_phase += (f0 + (f0_end - f0) * progress) / fs;
      double x = 0.0;
      if (pulse_phase >= 1.0) {
        pulse_phase -= 1.0;
        x = 1.0;
      }
      source = (1.0 - tilt) * x + tilt * source;
      double y = source;
      for (Resonator& r : formants) y = r.Process(y);
      const double rise = std::sin(std::numbers::pi * progress);
      out[t + i] = level * rise * rise * y;
    }
    f0 = f0_end;
    t += syllable;
  }
}

void NormalizePeak(std::vector<double>& x, double peak_target) {
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : x) v *= peak_target / peak;
  }
}

}  // namespace

AudioBuffer SpeechLikeSignal(std::uint64_t seed, double duration_s,
                             int sample_rate) {
  CheckSampleRate(sample_rate);
  std::mt19937_64 rng = MakeRng(seed, 0x5eec);
  const std::size_t n = SampleCount(duration_s, sample_rate);
  AudioBuffer out{std::vector<double>(n, 0.0), sample_rate};
  const double fs = sample_rate;
  const double base_f0 = Uniform(90.0, 230.0)(rng);
  std::size_t t = static_cast<std::size_t>(Uniform(0.05, 0.4)(rng) * fs);
  while (t < n) {
    const std::size_t end =
        std::min(n, t + static_cast<std::size_t>(Uniform(0.6, 2.0)(rng) * fs));
    RenderTalkspurt(rng, base_f0, t, end, sample_rate, out.samples);
    t = end + static_cast<std::size_t>(Uniform(0.3, 1.2)(rng) * fs);
  }
  NormalizePeak(out.samples, 0.5);
  return out;
}

ConversationPair SpeechLikeConversation(std::uint64_t seed, double duration_s,
                                        int sample_rate) {
  CheckSampleRate(sample_rate);
  std::mt19937_64 rng = MakeRng(seed, 0xc0de);
  const std::size_t n = SampleCount(duration_s, sample_rate);
  const double fs = sample_rate;
  ConversationPair pair{AudioBuffer{std::vector<double>(n, 0.0), sample_rate},
                        AudioBuffer{std::vector<double>(n, 0.0), sample_rate}};
  const double f0[2] = {Uniform(90.0, 230.0)(rng), Uniform(90.0, 230.0)(rng)};
  int talker = static_cast<int>(rng() & 1);
  double t = Uniform(0.05, 0.4)(rng);
  while (t * fs < n) {
    const double turn = Uniform(1.0, 2.5)(rng);
    const auto begin = static_cast<std::size_t>(t * fs);
    const auto end = std::min(n, static_cast<std::size_t>((t + turn) * fs));
    AudioBuffer& dst = talker == 0 ? pair.first : pair.second;
    RenderTalkspurt(rng, f0[talker], begin, end, sample_rate, dst.samples);
    // Negative gaps are interruptions, i.e. double talk.
    t += turn + Uniform(-0.6, 0.4)(rng);
    talker ^= 1;
  }
  NormalizePeak(pair.first.samples, 0.5);
  NormalizePeak(pair.second.samples, 0.5);
  return pair;
}

AudioBuffer WhiteNoise(std::uint64_t seed, double duration_s, int sample_rate) {
  CheckSampleRate(sample_rate);
  std::mt19937_64 rng = MakeRng(seed, 0x0153);
  std::normal_distribution<double> dist(0.0, 0.1);
  AudioBuffer out{std::vector<double>(SampleCount(duration_s, sample_rate)),
                  sample_rate};
  for (double& v : out.samples) v = dist(rng);
  return out;
}

std::vector<double> EchoPathFir(const ScenarioSpec& spec) {
  std::mt19937_64 rng = MakeRng(spec.seed, 0xf1f1);
  std::normal_distribution<double> dist(0.0, 1.0);
  const double decay = spec.EffectiveDecay();
  std::vector<double> fir(spec.echo_fir_len);
  fir[0] = 1.0;
  double envelope = 1.0;
  for (int k = 1; k < spec.echo_fir_len; ++k) {
    envelope *= decay;
    fir[k] = 0.1 * envelope * dist(rng);
  }
  return fir;
}

std::vector<double> Convolve(std::span<const double> signal,
                             std::span<const double> fir) {
  if (signal.empty() || fir.empty()) return std::vector<double>(signal.size());
  const int size =
      NextFastSize(static_cast<int>(signal.size() + fir.size() - 1));
  RealFft fft(size);
  std::vector<double> a(size, 0.0), b(size, 0.0);
  std::copy(signal.begin(), signal.end(), a.begin());
  std::copy(fir.begin(), fir.end(), b.begin());
  std::vector<Complex> fa(fft.num_bins()), fb(fft.num_bins());
  fft.Forward(a, fa);
  fft.Forward(b, fb);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  fft.Inverse(fa, a);
  a.resize(signal.size());
  return a;
}

ScenarioComponents GenerateScenario(const ScenarioSpec& spec,
                                    const AudioBuffer& nearend_src,
                                    const AudioBuffer& farend_src,
                                    const AudioBuffer& noise_src) {
  spec.Validate();
  const std::size_t n = SampleCount(spec.duration_s, spec.sample_rate);
  for (const AudioBuffer* src : {&nearend_src, &farend_src, &noise_src}) {
    if (src->sample_rate != spec.sample_rate) {
      throw RangeError("scenario: source sample rate differs from spec");
    }
    if (src->size() < n) throw DimensionError("scenario: source too short");
  }
  const int fs = spec.sample_rate;
  auto take = [n, fs](const AudioBuffer& src) {
    return AudioBuffer{std::vector<double>(src.samples.begin(),
                                           src.samples.begin() + n),
                       fs};
  };

  ScenarioComponents c;
  c.nearend = take(nearend_src);
  c.farend = take(farend_src);
  c.noise = take(noise_src);

  std::vector<double> distorted = c.farend.samples;
  if (spec.clip_level) {
    for (double& v : distorted) v = std::clamp(v, -*spec.clip_level, *spec.clip_level);
  }
  const std::vector<double> reverberant = Convolve(distorted, EchoPathFir(spec));

  c.true_delay = static_cast<int>(std::lround(spec.delay_ms * fs / 1000.0));
  c.true_delay_after_jump = c.true_delay;
  if (spec.jump_at_s) {
    c.jump_sample = static_cast<std::int64_t>(std::llround(*spec.jump_at_s * fs));
    c.true_delay_after_jump =
        static_cast<int>(std::lround(spec.jump_delay_ms * fs / 1000.0));
  }
  c.echo = AudioBuffer{std::vector<double>(n, 0.0), fs};
  for (std::size_t i = 0; i < n; ++i) {
    const bool after_jump =
        c.jump_sample >= 0 && static_cast<std::int64_t>(i) >= c.jump_sample;
    const std::size_t delay = after_jump ? c.true_delay_after_jump : c.true_delay;
    if (i >= delay) c.echo.samples[i] = reverberant[i - delay];
  }

  const double e_s = Energy(c.nearend.samples);
  const double e_d = Energy(c.echo.samples);
  const double e_n = Energy(c.noise.samples);
  if (e_s <= 0.0 || e_d <= 0.0 || e_n <= 0.0) {
    throw RangeError("scenario: near-end, echo and noise need nonzero energy");
  }
  const double echo_gain = std::sqrt(e_s / (e_d * std::pow(10.0, spec.ser_db / 10.0)));
  const double noise_gain = std::sqrt(e_s / (e_n * std::pow(10.0, spec.snr_db / 10.0)));
  for (double& v : c.echo.samples) v *= echo_gain;
  for (double& v : c.noise.samples) v *= noise_gain;

  c.mic = AudioBuffer{std::vector<double>(n), fs};
  for (std::size_t i = 0; i < n; ++i) {
    c.mic.samples[i] = c.nearend.samples[i] + c.echo.samples[i] + c.noise.samples[i];
  }
  return c;
}

ScenarioComponents GenerateSyntheticScenario(const ScenarioSpec& spec) {
  spec.Validate();
  const std::uint64_t base = spec.seed * 4;
  const ConversationPair talkers =
      SpeechLikeConversation(base + 1, spec.duration_s, spec.sample_rate);
  return GenerateScenario(spec, talkers.first, talkers.second,
                          WhiteNoise(base + 3, spec.duration_s, spec.sample_rate));
}

AudioBuffer ShadowProcess(const AudioBuffer& signal, const MaskTrace& trace,
                          const FrameGrid& grid) {
  const std::size_t n = signal.size();
  AudioBuffer padded = signal;
  padded.samples.resize(n + grid.latency_samples(), 0.0);
  std::vector<SpectralFrame> frames = Analyze(Highpass50Hz(padded), grid);
  if (frames.size() != trace.size()) {
    throw DimensionError("shadow: trace has " + std::to_string(trace.size()) +
                         " frames, signal yields " +
                         std::to_string(frames.size()));
  }
  const std::int64_t count = static_cast<std::int64_t>(frames.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t l = 0; l < count; ++l) {
    SpectralFrame& f = frames[l];
    ZeroUpperBandInPlace(f);
    const MaskTraceEntry& entry = trace[l];
    if (entry.aec) f = ApplyMask(f, *entry.aec);
    if (entry.pf) f = ApplyMask(f, *entry.pf);
  }
  AudioBuffer out = Synthesize(frames, grid);
  out.samples.resize(n);
  return out;
}

AudioBuffer WidebandReference(const AudioBuffer& signal, const FrameGrid& grid) {
  const std::size_t n = signal.size();
  AudioBuffer padded = signal;
  padded.samples.resize(n + grid.latency_samples(), 0.0);
  std::vector<SpectralFrame> frames = Analyze(Highpass50Hz(padded), grid);
  for (SpectralFrame& f : frames) ZeroUpperBandInPlace(f);
  AudioBuffer out = Synthesize(frames, grid);
  out.samples.resize(n);
  return out;
}

double ErleBb(const ScenarioComponents& components, const MaskTrace& trace,
              const FrameGrid& grid) {
  const Region region = EvaluationRegion(components.echo.size(), grid);
  const AudioBuffer reference = WidebandReference(components.echo, grid);
  const AudioBuffer residual = ShadowProcess(components.echo, trace, grid);
  const double e_ref = Energy(Slice(reference, region));
  if (e_ref <= 0.0) throw RangeError("erle: echo component has no energy");
  return CappedErle(e_ref, Energy(Slice(residual, region)));
}

double DeltaSnrBb(const ScenarioComponents& components, const MaskTrace& trace,
                  const FrameGrid& grid) {
  return EvaluateBlackBox(components, trace, grid).delta_snr_db;
}

BlackBoxMetrics EvaluateBlackBox(const ScenarioComponents& components,
                                 const MaskTrace& trace, const FrameGrid& grid) {
  const Region region = EvaluationRegion(components.echo.size(), grid);
  BlackBoxMetrics m;

  const AudioBuffer echo_ref = WidebandReference(components.echo, grid);
  const AudioBuffer echo_out = ShadowProcess(components.echo, trace, grid);
  const AudioBuffer speech_ref = WidebandReference(components.nearend, grid);
  const AudioBuffer speech_out = ShadowProcess(components.nearend, trace, grid);
  const AudioBuffer noise_ref = WidebandReference(components.noise, grid);
  const AudioBuffer noise_out = ShadowProcess(components.noise, trace, grid);

  const double e_echo = Energy(Slice(echo_ref, region));
  if (e_echo <= 0.0) throw RangeError("erle: echo component has no energy");
  m.erle_db = CappedErle(e_echo, Energy(Slice(echo_out, region)));

  const double e_s_in = Energy(Slice(speech_ref, region));
  const double e_n_in = Energy(Slice(noise_ref, region));
  const double e_s_out = Energy(Slice(speech_out, region));
  const double e_n_out = Energy(Slice(noise_out, region));
  if (e_s_in <= 0.0 || e_n_in <= 0.0) {
    throw RangeError("dsnr: speech and noise components need energy");
  }
  m.snr_in_db = EnergyDb(e_s_in, e_n_in);
  if (e_s_out <= 0.0) {
    m.snr_out_db = -kErleCapDb;
  } else if (e_n_out <= 0.0) {
    m.snr_out_db = m.snr_in_db + kErleCapDb;
  } else {
    m.snr_out_db = EnergyDb(e_s_out, e_n_out);
  }
  m.delta_snr_db = m.snr_out_db - m.snr_in_db;

  const std::size_t block = grid.frame_shift;
  for (std::size_t b = region.begin; b + block <= region.end; b += block) {
    const Region r{b, b + block};
    const double e_in = Energy(Slice(echo_ref, r));
    const double e_out = Energy(Slice(echo_out, r));
    if (e_in <= 0.0) {
      m.block_erle_db.push_back(0.0);
    } else {
      m.block_erle_db.push_back(CappedErle(e_in, e_out));
    }
  }
  return m;
}

EvaluationReport RunEvaluation(const ScenarioSpec& spec,
                               const PipelineConfig& cfg) {
  if (spec.sample_rate != cfg.sample_rate) {
    throw RangeError("evaluate: scenario and pipeline sample rates differ");
  }
  const ScenarioComponents c = GenerateSyntheticScenario(spec);
  PipelineConfig run_cfg = cfg;
  run_cfg.emit_mask_trace = true;
  const OracleSignals oracle{Sum(c.nearend, c.noise), c.nearend};
  const ProcessResult result = ProcessStream(run_cfg, c.mic, c.farend, &oracle);

  EvaluationReport report;
  report.spec = spec;
  report.metrics = EvaluateBlackBox(c, result.trace.masks, cfg.grid);
  report.config_digest = cfg.Digest();
  report.latency_samples = result.latency_samples;
  report.latency_ms = result.latency_ms;
  return report;
}

std::vector<EvaluationReport> RunEvaluations(std::span<const ScenarioSpec> specs,
                                             const PipelineConfig& cfg) {
  std::vector<EvaluationReport> reports(specs.size());
  std::vector<std::exception_ptr> errors(specs.size());
  const std::int64_t count = static_cast<std::int64_t>(specs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      reports[i] = RunEvaluation(specs[i], cfg);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return reports;
}

nlohmann::json ReportToJson(const EvaluationReport& report) {
  nlohmann::json j;
  j["scenario"] = report.spec.ToJson();
  j["metrics"] = {
      {"erle_bb_db", report.metrics.erle_db},
      {"delta_snr_bb_db", report.metrics.delta_snr_db},
      {"snr_in_db", report.metrics.snr_in_db},
      {"snr_out_db", report.metrics.snr_out_db},
  };
  j["config_digest"] = report.config_digest;
  j["latency_samples"] = report.latency_samples;
  j["latency_ms"] = report.latency_ms;
  return j;
}

std::string BlockErleCsv(const BlackBoxMetrics& metrics) {
  std::ostringstream os;
  os.precision(10);
  os << "block,erle_db\n";
  for (std::size_t i = 0; i < metrics.block_erle_db.size(); ++i) {
    os << i << "," << metrics.block_erle_db[i] << "\n";
  }
  return os.str();
}

}  // namespace fbaec
