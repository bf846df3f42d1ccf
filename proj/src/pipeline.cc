#include "fbaec/pipeline.h"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fbaec/errors.h"

namespace fbaec {
namespace {

std::string Trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "on" || value == "true" || value == "1" || value == "yes") {
    return true;
  }
  if (value == "off" || value == "false" || value == "0" || value == "no") {
    return false;
  }
  throw FormatError("config: " + key + " expects on/off, got '" + value + "'");
}

double ParseNumber(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw FormatError("config: " + key + " expects a number, got '" + value +
                      "'");
  }
}

std::unique_ptr<AecEstimator> MakeAec(const EstimatorChoice& choice,
                                      const OracleSignals* oracle,
                                      const FrameGrid& grid,
                                      std::size_t padded_len) {
  switch (choice.kind) {
    case EstimatorKind::kNone:
      return nullptr;
    case EstimatorKind::kIdentity:
      return std::make_unique<ConstantMaskEstimator>(
          Complex(kIdentityMaskMagnitude, 0.0));
    case EstimatorKind::kConstant:
      return std::make_unique<ConstantMaskEstimator>(
          Complex(std::atanh(choice.gain), 0.0));
    case EstimatorKind::kOracle:
      if (oracle == nullptr) {
        throw RangeError("oracle estimator requires ground-truth components");
      }
      return std::make_unique<OracleMaskEstimator>(
          OracleTargetFrames(oracle->aec_target, grid, padded_len));
  }
  return nullptr;
}

std::unique_ptr<PostfilterEstimator> MakePf(const EstimatorChoice& choice,
                                            const OracleSignals* oracle,
                                            const FrameGrid& grid,
                                            std::size_t padded_len) {
  switch (choice.kind) {
    case EstimatorKind::kNone:
      return nullptr;
    case EstimatorKind::kIdentity:
      return std::make_unique<ConstantMaskEstimator>(
          Complex(kIdentityMaskMagnitude, 0.0));
    case EstimatorKind::kConstant:
      return std::make_unique<ConstantMaskEstimator>(
          Complex(std::atanh(choice.gain), 0.0));
    case EstimatorKind::kOracle:
      if (oracle == nullptr) {
        throw RangeError("oracle estimator requires ground-truth components");
      }
      return std::make_unique<OracleMaskEstimator>(
          OracleTargetFrames(oracle->pf_target, grid, padded_len));
  }
  return nullptr;
}

}  // namespace

EstimatorChoice EstimatorChoice::Parse(const std::string& text) {
  EstimatorChoice c;
  if (text == "none") {
    c.kind = EstimatorKind::kNone;
  } else if (text == "identity") {
    c.kind = EstimatorKind::kIdentity;
  } else if (text == "oracle") {
    c.kind = EstimatorKind::kOracle;
  } else if (text.rfind("constant:", 0) == 0) {
    c.kind = EstimatorKind::kConstant;
    c.gain = ParseNumber("estimator", text.substr(9));
    if (!(c.gain >= 0.0 && c.gain < 1.0)) {
      throw RangeError("constant estimator gain must lie in [0, 1)");
    }
  } else {
    throw FormatError("unknown estimator '" + text +
                      "' (expected oracle | identity | constant:<g> | none)");
  }
  return c;
}

std::string EstimatorChoice::ToString() const {
  switch (kind) {
    case EstimatorKind::kNone:
      return "none";
    case EstimatorKind::kIdentity:
      return "identity";
    case EstimatorKind::kOracle:
      return "oracle";
    case EstimatorKind::kConstant: {
      std::ostringstream os;
      os.precision(17);
      os << "constant:" << gain;
      return os.str();
    }
  }
  return "?";
}

PipelineConfig PipelineConfig::Defaults(int sample_rate) {
  PipelineConfig cfg;
  cfg.sample_rate = sample_rate;
  cfg.grid = FrameGrid::ForSampleRate(sample_rate);
  cfg.ddc = DdcConfig::ForSampleRate(sample_rate);
  return cfg;
}

void PipelineConfig::Validate() const {
  CheckSampleRate(sample_rate);
  if (!(grid == FrameGrid::ForSampleRate(sample_rate))) {
    throw RangeError("pipeline: grid does not match sample rate");
  }
  if (ddc) {
    ddc->Validate();
    if (ddc->sample_rate != sample_rate) {
      throw RangeError("pipeline: DDC sample rate differs from pipeline");
    }
  }
  if (bwe_enabled) {
    if (sample_rate != 48000) {
      throw RangeError("bandwidth extension requires 48 kHz");
    }
    if (!bwe_weights && bwe_weights_path.empty()) {
      throw RangeError("bandwidth extension enabled without weights");
    }
  }
}

std::string PipelineConfig::Canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "sample_rate=" << sample_rate << "\n";
  os << "frame_len=" << grid.frame_len << "\n";
  os << "dft_size=" << grid.dft_size << "\n";
  os << "ddc=" << (ddc ? "on" : "off") << "\n";
  if (ddc) {
    os << "ddc_frame_len=" << ddc->frame_len << "\n";
    os << "ddc_frame_shift=" << ddc->frame_shift << "\n";
    os << "ddc_smoothing=" << ddc->smoothing << "\n";
    os << "ddc_band=" << ddc->band_lo_hz << "-" << ddc->band_hi_hz << "\n";
    os << "ddc_stability_frames=" << ddc->stability_frames << "\n";
    os << "ddc_stability_tol=" << ddc->stability_tol << "\n";
    os << "ddc_backoff_ms=" << ddc->backoff_ms << "\n";
    os << "ddc_max_delay=" << ddc->max_delay << "\n";
  }
  os << "aec_estimator=" << aec.ToString() << "\n";
  os << "pf_estimator=" << pf.ToString() << "\n";
  os << "bwe=" << (bwe_enabled ? "on" : "off") << "\n";
  if (bwe_enabled) {
    if (bwe_weights) {
      const auto bytes = SerializeBweWeights(*bwe_weights);
      char crc[16];
      std::snprintf(crc, sizeof(crc), "%02x%02x%02x%02x", bytes[bytes.size() - 1],
                    bytes[bytes.size() - 2], bytes[bytes.size() - 3],
                    bytes[bytes.size() - 4]);
      os << "bwe_weights=crc:" << crc << "\n";
    } else {
      os << "bwe_weights=" << bwe_weights_path << "\n";
    }
  }
  return os.str();
}

std::string PipelineConfig::Digest() const {
  const std::string text = Canonical();
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(text.data()),
              static_cast<uInt>(text.size()));
  char hex[16];
  std::snprintf(hex, sizeof(hex), "%08lx", static_cast<unsigned long>(crc));
  return hex;
}

std::map<std::string, std::string> ParseConfigText(const std::string& text) {
  std::map<std::string, std::string> entries;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    if (key.empty()) {
      throw FormatError("config line " + std::to_string(line_no) +
                        ": empty key");
    }
    entries[key] = value;
  }
  return entries;
}

void ApplyConfigEntries(const std::map<std::string, std::string>& entries,
                        PipelineConfig& cfg) {
  // The sample rate determines the grid and DDC defaults, so it goes first.
  if (auto it = entries.find("sample_rate"); it != entries.end()) {
    const int rate = static_cast<int>(ParseNumber(it->first, it->second));
    const bool had_ddc = cfg.ddc.has_value();
    PipelineConfig fresh = PipelineConfig::Defaults(rate);
    cfg.sample_rate = rate;
    cfg.grid = fresh.grid;
    cfg.ddc = had_ddc ? fresh.ddc : std::nullopt;
  }
  for (const auto& [key, value] : entries) {
    if (key == "sample_rate") continue;
    if (key == "ddc") {
      if (ParseBool(key, value)) {
        if (!cfg.ddc) cfg.ddc = DdcConfig::ForSampleRate(cfg.sample_rate);
      } else {
        cfg.ddc.reset();
      }
    } else if (key.rfind("ddc_", 0) == 0) {
      if (!cfg.ddc) cfg.ddc = DdcConfig::ForSampleRate(cfg.sample_rate);
      DdcConfig& d = *cfg.ddc;
      if (key == "ddc_smoothing") {
        d.smoothing = ParseNumber(key, value);
      } else if (key == "ddc_backoff_ms") {
        d.backoff_ms = ParseNumber(key, value);
      } else if (key == "ddc_stability_frames") {
        d.stability_frames = static_cast<int>(ParseNumber(key, value));
      } else if (key == "ddc_stability_tol") {
        d.stability_tol = static_cast<int>(ParseNumber(key, value));
      } else if (key == "ddc_max_delay_ms") {
        d.max_delay = static_cast<int>(
            std::lround(ParseNumber(key, value) * d.sample_rate / 1000.0));
      } else if (key == "ddc_band_lo_hz") {
        d.band_lo_hz = ParseNumber(key, value);
      } else if (key == "ddc_band_hi_hz") {
        d.band_hi_hz = ParseNumber(key, value);
      } else if (key == "ddc_concurrent") {
        d.concurrent = ParseBool(key, value);
      } else {
        throw FormatError("config: unknown key '" + key + "'");
      }
    } else if (key == "aec_estimator") {
      cfg.aec = EstimatorChoice::Parse(value);
    } else if (key == "pf_estimator") {
      cfg.pf = EstimatorChoice::Parse(value);
    } else if (key == "bwe") {
      cfg.bwe_enabled = ParseBool(key, value);
    } else if (key == "bwe_weights") {
      cfg.bwe_weights_path = value;
    } else if (key == "emit_mask_trace") {
      cfg.emit_mask_trace = ParseBool(key, value);
    } else {
      throw FormatError("config: unknown key '" + key + "'");
    }
  }
}

PipelineConfig LoadPipelineConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  PipelineConfig cfg = PipelineConfig::Defaults(48000);
  ApplyConfigEntries(ParseConfigText(buffer.str()), cfg);
  return cfg;
}

std::vector<SpectralFrame> OracleTargetFrames(const AudioBuffer& signal,
                                              const FrameGrid& grid,
                                              std::size_t padded_len) {
  AudioBuffer padded = signal;
  if (padded.samples.size() < padded_len) padded.samples.resize(padded_len, 0.0);
  std::vector<SpectralFrame> frames = Analyze(Highpass50Hz(padded), grid);
  for (SpectralFrame& f : frames) ZeroUpperBandInPlace(f);
  return frames;
}

StreamSession::StreamSession(const PipelineConfig& cfg,
                             std::unique_ptr<AecEstimator> aec,
                             std::unique_ptr<PostfilterEstimator> pf,
                             std::shared_ptr<const BweWeights> bwe_weights)
    : cfg_(cfg),
      transform_(cfg.grid),
      aec_(std::move(aec)),
      pf_(std::move(pf)),
      bwe_(std::move(bwe_weights)),
      mic_hpf_(cfg.sample_rate),
      ref_hpf_(cfg.sample_rate),
      mic_frame_(cfg.grid.frame_len, 0.0),
      ref_frame_(cfg.grid.frame_len, 0.0),
      ola_(cfg.grid.frame_len, 0.0),
      synth_scratch_(cfg.grid.frame_len, 0.0),
      output_fifo_(cfg.grid.latency_samples(), 0.0) {
  cfg_.Validate();
  if (cfg_.bwe_enabled && !bwe_) {
    throw RangeError("bandwidth extension enabled without weights");
  }
  if (!cfg_.bwe_enabled) bwe_.reset();
  if (cfg_.ddc) {
    ddc_ = std::make_unique<DelayCompensator>(*cfg_.ddc);
    ring_ = std::make_unique<ReferenceRingbuffer>(cfg_.ddc->max_delay +
                                                  cfg_.ddc->frame_len);
  }
}

std::vector<double> StreamSession::Process(std::span<const double> mic,
                                           std::span<const double> farend) {
  if (mic.size() != farend.size()) {
    throw DimensionError("stream: mic and far-end chunks differ in length");
  }
  std::vector<double> out;
  out.reserve(mic.size());
  for (std::size_t i = 0; i < mic.size(); ++i) {
    if (!std::isfinite(mic[i]) || !std::isfinite(farend[i])) {
      throw RangeError("stream: non-finite input sample");
    }
    PushSample(mic[i], farend[i], out);
  }
  return out;
}

std::vector<double> StreamSession::Flush() {
  std::vector<double> out;
  out.reserve(latency_samples());
  for (int i = 0; i < latency_samples(); ++i) PushSample(0.0, 0.0, out);
  return out;
}

PipelineTrace StreamSession::TakeTrace() {
  if (ddc_) trace_.delays = ddc_->trace();
  return std::move(trace_);
}

void StreamSession::PushSample(double mic, double far, std::vector<double>& out) {
  double ref = far;
  if (ddc_) {
    ddc_->Push(mic, far);
    ring_->Write(far);
    ref = ring_->Read(active_delay_);
  }
  mic_frame_[frame_fill_] = mic_hpf_.Process(mic);
  ref_frame_[frame_fill_] = ref_hpf_.Process(ref);
  ++frame_fill_;
  ++samples_in_;

  if (frame_fill_ == cfg_.grid.frame_len) {
    ProcessFrame();
    const int keep = cfg_.grid.frame_len - cfg_.grid.frame_shift;
    std::copy(mic_frame_.begin() + cfg_.grid.frame_shift, mic_frame_.end(),
              mic_frame_.begin());
    std::copy(ref_frame_.begin() + cfg_.grid.frame_shift, ref_frame_.end(),
              ref_frame_.begin());
    frame_fill_ = keep;
  }
  // Delay switches happen on frame boundaries only.
  if (ddc_ && samples_in_ % cfg_.grid.frame_shift == 0) {
    ddc_->AdvanceTo(samples_in_);
    active_delay_ = ddc_->active_delay();
  }

  out.push_back(output_fifo_.front());
  output_fifo_.pop_front();
}

void StreamSession::ProcessFrame() {
  const FrameGrid& grid = cfg_.grid;
  SpectralFrame mic = transform_.Forward(mic_frame_, frame_index_);
  ZeroUpperBandInPlace(mic);

  MaskTraceEntry entry;
  entry.frame_index = frame_index_;

  SpectralFrame echo_reduced = mic;
  ComplexMask aec_mask =
      ConstantMask(grid, frame_index_, Complex(kIdentityMaskMagnitude, 0.0));
  if (aec_) {
    SpectralFrame ref = transform_.Forward(ref_frame_, frame_index_);
    ZeroUpperBandInPlace(ref);
    aec_mask = AecEstimate(*aec_, mic, ref);
    echo_reduced = ApplyMask(mic, aec_mask);
    if (cfg_.emit_mask_trace) entry.aec = aec_mask;
  }

  SpectralFrame enhanced = echo_reduced;
  if (pf_) {
    ComplexMask pf_mask = PfEstimate(*pf_, echo_reduced, aec_mask);
    enhanced = ApplyMask(echo_reduced, pf_mask);
    if (cfg_.emit_mask_trace) entry.pf = std::move(pf_mask);
  }

  if (bwe_) {
    double gamma = 0.0;
    enhanced = ExtendBandwidth(*bwe_, enhanced, &gamma);
    trace_.gammas.push_back(gamma);
  }

  if (cfg_.emit_mask_trace) trace_.masks.push_back(std::move(entry));
  trace_.frame_delays.push_back(active_delay_);

  transform_.Inverse(enhanced, synth_scratch_);
  if (cfg_.emit_output_spectra) trace_.output_spectra.push_back(std::move(enhanced));

  // Same accumulation order as the batch Synthesize: previous frame's tail
  // first, then this frame.
  const int shift = grid.frame_shift;
  for (int i = 0; i < grid.frame_len; ++i) ola_[i] += synth_scratch_[i];
  for (int i = 0; i < shift; ++i) output_fifo_.push_back(ola_[i]);
  std::copy(ola_.begin() + shift, ola_.end(), ola_.begin());
  std::fill(ola_.end() - shift, ola_.end(), 0.0);
  ++frame_index_;
}

StreamSession MakeSession(const PipelineConfig& cfg,
                          const OracleSignals* oracle,
                          std::size_t oracle_len) {
  cfg.Validate();
  const std::size_t padded = oracle_len + cfg.grid.latency_samples();
  std::shared_ptr<const BweWeights> weights;
  if (cfg.bwe_enabled) {
    weights = cfg.bwe_weights
                  ? cfg.bwe_weights
                  : std::make_shared<const BweWeights>(
                        LoadBweWeights(cfg.bwe_weights_path));
  }
  return StreamSession(cfg, MakeAec(cfg.aec, oracle, cfg.grid, padded),
                       MakePf(cfg.pf, oracle, cfg.grid, padded),
                       std::move(weights));
}

ProcessResult ProcessStream(const PipelineConfig& cfg, const AudioBuffer& mic,
                            const AudioBuffer& farend,
                            const OracleSignals* oracle) {
  ValidateAudio(mic);
  ValidateAudio(farend);
  if (mic.sample_rate != cfg.sample_rate ||
      farend.sample_rate != cfg.sample_rate) {
    throw RangeError("process: input sample rate differs from configuration");
  }
  const std::size_t n = std::min(mic.size(), farend.size());
  const std::size_t diff = std::max(mic.size(), farend.size()) - n;
  if (diff > static_cast<std::size_t>(cfg.grid.frame_len)) {
    throw DimensionError("process: mic and far-end lengths differ by more "
                         "than one frame");
  }

  StreamSession session = MakeSession(cfg, oracle, n);
  std::vector<double> streamed =
      session.Process(std::span<const double>(mic.samples.data(), n),
                      std::span<const double>(farend.samples.data(), n));
  std::vector<double> tail = session.Flush();
  streamed.insert(streamed.end(), tail.begin(), tail.end());

  ProcessResult result;
  result.latency_samples = session.latency_samples();
  result.latency_ms = cfg.grid.latency_ms();
  result.dropped_samples = diff;
  result.output.sample_rate = cfg.sample_rate;
  result.output.samples.assign(streamed.begin() + result.latency_samples,
                               streamed.end());
  result.trace = session.TakeTrace();
  return result;
}

}  // namespace fbaec
