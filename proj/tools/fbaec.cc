// Command-line front end: process, simulate, evaluate, losses, bwe-check.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "fbaec/bwe.h"
#include "fbaec/errors.h"
#include "fbaec/evalkit.h"
#include "fbaec/objectives.h"
#include "fbaec/pipeline.h"
#include "fbaec/spectral.h"
#include "fbaec/wav_io.h"
#include "json.hpp"

namespace fbaec {
namespace {

using nlohmann::json;

// Flags shared by process and evaluate.
struct PipelineFlags {
  std::string config_path;
  std::optional<int> sample_rate;
  bool no_ddc = false;
  bool no_pf = false;
  bool no_bwe = false;
  std::string estimator;
  std::string bwe_weights;
  std::string emit_trace;
  std::string report;
};

void AddPipelineFlags(CLI::App* app, PipelineFlags& f) {
  app->add_option("--config", f.config_path, "key = value configuration file")
      ->check(CLI::ExistingFile);
  app->add_option("--sample-rate", f.sample_rate, "16000 or 48000");
  app->add_flag("--no-ddc", f.no_ddc, "Disable delay compensation");
  app->add_flag("--no-pf", f.no_pf, "Bypass the postfilter stage");
  app->add_flag("--no-bwe", f.no_bwe, "Disable bandwidth extension");
  app->add_option("--estimator", f.estimator,
                  "Mask estimator for AEC and PF: oracle | identity | "
                  "constant:<g> | none");
  app->add_option("--bwe-weights", f.bwe_weights, "BWEW v1 weight file");
  app->add_option("--emit-trace", f.emit_trace, "Write the delay/mask trace as JSON");
  app->add_option("--report", f.report, "Write the JSON report here");
}

// Config file first, then flags on top.
PipelineConfig BuildConfig(const PipelineFlags& f, int default_rate) {
  int rate = f.sample_rate.value_or(default_rate);
  std::map<std::string, std::string> entries;
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    const std::string text((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    entries = ParseConfigText(text);
    if (!f.sample_rate) {
      if (auto it = entries.find("sample_rate"); it != entries.end()) {
        rate = std::stoi(it->second);
      }
    }
  }
  entries.erase("sample_rate");
  PipelineConfig cfg = PipelineConfig::Defaults(rate);
  ApplyConfigEntries(entries, cfg);
  if (f.no_ddc) cfg.ddc.reset();
  if (!f.estimator.empty()) {
    cfg.aec = EstimatorChoice::Parse(f.estimator);
    cfg.pf = cfg.aec;
  }
  if (f.no_pf) cfg.pf = EstimatorChoice::Parse("none");
  if (!f.bwe_weights.empty()) {
    cfg.bwe_weights_path = f.bwe_weights;
    cfg.bwe_enabled = true;
  }
  if (f.no_bwe) cfg.bwe_enabled = false;
  cfg.Validate();
  return cfg;
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

json TraceToJson(const PipelineTrace& trace) {
  json j;
  j["ddc"] = json::array();
  for (const DelayTraceEntry& e : trace.delays) {
    j["ddc"].push_back({{"ddc_frame", e.ddc_frame},
                        {"frame_end", e.frame_end},
                        {"effective_at", e.effective_at},
                        {"tau_inst", e.tau_inst},
                        {"tau_active", e.tau_active}});
  }
  j["frame_delays"] = trace.frame_delays;
  j["bwe_gamma"] = trace.gammas;
  json masks = json::array();
  for (const MaskTraceEntry& m : trace.masks) {
    json entry{{"frame", m.frame_index}};
    for (const auto& [name, mask] : {std::pair{"aec", &m.aec}, std::pair{"pf", &m.pf}}) {
      if (!mask->has_value()) continue;
      json re = json::array(), im = json::array();
      for (const Complex& v : (*mask)->values) {
        re.push_back(v.real());
        im.push_back(v.imag());
      }
      entry[std::string(name) + "_re"] = std::move(re);
      entry[std::string(name) + "_im"] = std::move(im);
    }
    masks.push_back(std::move(entry));
  }
  j["masks"] = std::move(masks);
  return j;
}

int RunProcess(const PipelineFlags& flags, const std::string& mic_path,
               const std::string& far_path, const std::string& out_path,
               bool pcm16) {
  const AudioBuffer mic = ReadWav(mic_path);
  const AudioBuffer far = ReadWav(far_path);
  PipelineConfig cfg = BuildConfig(flags, mic.sample_rate);
  cfg.emit_mask_trace = !flags.emit_trace.empty();
  if (cfg.aec.kind == EstimatorKind::kOracle ||
      cfg.pf.kind == EstimatorKind::kOracle) {
    throw RangeError("process: the oracle estimator needs ground truth; use "
                     "evaluate");
  }
  const ProcessResult r = ProcessStream(cfg, mic, far);
  if (r.dropped_samples > 0) {
    std::cerr << "warning: dropped " << r.dropped_samples
              << " trailing samples of the longer input\n";
  }
  WriteWav(out_path, r.output, pcm16 ? WavFormat::kPcm16 : WavFormat::kFloat32);

  json report{{"input_samples", r.output.size()},
              {"dropped_samples", r.dropped_samples},
              {"sample_rate", cfg.sample_rate},
              {"latency_samples", r.latency_samples},
              {"latency_ms", r.latency_ms},
              {"config_digest", cfg.Digest()},
              {"ddc", cfg.ddc.has_value()},
              {"aec_estimator", cfg.aec.ToString()},
              {"pf_estimator", cfg.pf.ToString()},
              {"bwe", cfg.bwe_enabled}};
  if (!r.trace.delays.empty()) {
    report["final_delay_samples"] = r.trace.delays.back().tau_active;
  }
  const std::string report_path =
      flags.report.empty() ? out_path + ".json" : flags.report;
  WriteText(report_path, report.dump(2) + "\n");
  if (!flags.emit_trace.empty()) {
    WriteText(flags.emit_trace, TraceToJson(r.trace).dump() + "\n");
  }
  return 0;
}

struct ScenarioFlags {
  std::uint64_t seed = 1;
  double ser_db = 0.0;
  double snr_db = 20.0;
  double delay_ms = 100.0;
  double duration_s = 10.0;
  std::optional<double> clip;
  bool no_clip = false;
  std::optional<double> jump_at_s;
  double jump_delay_ms = 0.0;
};

void AddScenarioFlags(CLI::App* app, ScenarioFlags& f) {
  app->add_option("--ser", f.ser_db, "Signal-to-echo ratio in dB");
  app->add_option("--snr", f.snr_db, "Signal-to-noise ratio in dB");
  app->add_option("--delay-ms", f.delay_ms, "Echo delay");
  app->add_option("--duration", f.duration_s, "Seconds");
  app->add_option("--clip", f.clip, "Far-end clip level");
  app->add_flag("--no-clip", f.no_clip, "No far-end clipping");
  app->add_option("--jump-at", f.jump_at_s, "Time of an echo delay jump (s)");
  app->add_option("--jump-delay-ms", f.jump_delay_ms, "Echo delay after the jump");
}

ScenarioSpec MakeSpec(const ScenarioFlags& f, std::uint64_t seed, int rate) {
  ScenarioSpec s;
  s.seed = seed;
  s.ser_db = f.ser_db;
  s.snr_db = f.snr_db;
  s.delay_ms = f.delay_ms;
  s.duration_s = f.duration_s;
  s.sample_rate = rate;
  if (f.clip) s.clip_level = *f.clip;
  if (f.no_clip) s.clip_level.reset();
  s.jump_at_s = f.jump_at_s;
  s.jump_delay_ms = f.jump_delay_ms;
  s.Validate();
  return s;
}

int RunSimulate(const ScenarioFlags& flags, int rate, const std::string& out_dir,
                const std::string& spec_path, bool pcm16) {
  ScenarioSpec spec;
  if (!spec_path.empty()) {
    std::ifstream in(spec_path);
    if (!in) throw Error("cannot read " + spec_path);
    spec = ScenarioSpec::FromJson(json::parse(in));
  } else {
    spec = MakeSpec(flags, flags.seed, rate);
  }
  const ScenarioComponents c = GenerateSyntheticScenario(spec);
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  const WavFormat fmt = pcm16 ? WavFormat::kPcm16 : WavFormat::kFloat32;
  WriteWav(dir / "mic.wav", c.mic, fmt);
  WriteWav(dir / "farend.wav", c.farend, fmt);
  WriteWav(dir / "nearend.wav", c.nearend, fmt);
  WriteWav(dir / "echo.wav", c.echo, fmt);
  WriteWav(dir / "noise.wav", c.noise, fmt);
  json meta = spec.ToJson();
  meta["true_delay_samples"] = c.true_delay;
  meta["true_delay_after_jump_samples"] = c.true_delay_after_jump;
  meta["jump_sample"] = c.jump_sample;
  WriteText(dir / "scenario.json", meta.dump(2) + "\n");
  return 0;
}

int RunEvaluate(const PipelineFlags& pflags, const ScenarioFlags& sflags,
                const std::vector<std::uint64_t>& seeds,
                const std::string& block_csv) {
  const PipelineConfig cfg = BuildConfig(pflags, 48000);
  std::vector<ScenarioSpec> specs;
  for (std::uint64_t seed : seeds) {
    specs.push_back(MakeSpec(sflags, seed, cfg.sample_rate));
  }
  const std::vector<EvaluationReport> reports = RunEvaluations(specs, cfg);

  json out;
  if (reports.size() == 1) {
    out = ReportToJson(reports.front());
  } else {
    out["runs"] = json::array();
    double erle = 0.0, dsnr = 0.0;
    for (const EvaluationReport& r : reports) {
      out["runs"].push_back(ReportToJson(r));
      erle += r.metrics.erle_db;
      dsnr += r.metrics.delta_snr_db;
    }
    out["mean"] = {{"erle_bb_db", erle / reports.size()},
                   {"delta_snr_bb_db", dsnr / reports.size()}};
  }
  out["aec_estimator"] = cfg.aec.ToString();
  out["pf_estimator"] = cfg.pf.ToString();
  const std::string text = out.dump(2) + "\n";
  if (pflags.report.empty()) {
    std::cout << text;
  } else {
    WriteText(pflags.report, text);
  }
  if (!block_csv.empty()) WriteText(block_csv, BlockErleCsv(reports.front().metrics));
  return 0;
}

std::vector<SpectralFrame> LossFrames(const AudioBuffer& a) {
  const FrameGrid grid = FrameGrid::ForSampleRate(a.sample_rate);
  return Analyze(a, grid);
}

std::vector<std::vector<double>> UpperBandMagnitudes(
    const std::vector<SpectralFrame>& frames) {
  std::vector<std::vector<double>> out;
  for (const SpectralFrame& f : frames) {
    std::vector<double> m;
    for (int k = f.grid.wb_cut_bin + 1; k < f.grid.num_onesided_bins; ++k) {
      m.push_back(std::abs(f.bins[k]));
    }
    out.push_back(std::move(m));
  }
  return out;
}

int RunLosses(const std::string& est_path, const std::string& ref_path,
              const std::string& aec_est_path, const std::string& aec_ref_path,
              const std::string& report) {
  const AudioBuffer est = ReadWav(est_path);
  const AudioBuffer ref = ReadWav(ref_path);
  if (est.sample_rate != ref.sample_rate) {
    throw RangeError("losses: sample rates differ");
  }
  if (est.size() != ref.size()) throw DimensionError("losses: lengths differ");
  const LossConfig cfg;
  const std::vector<SpectralFrame> e = LossFrames(est);
  const std::vector<SpectralFrame> r = LossFrames(ref);
  const FrameGrid grid = FrameGrid::ForSampleRate(est.sample_rate);
  const int wb_bins = grid.wb_cut_bin + 1;

  const double pf = SequenceSpectralLoss(e, r, wb_bins);
  const double mc = SequenceMagnitudeCompressedLoss(e, r, cfg);
  const double cc = SequenceComplexCompressedLoss(e, r, cfg);
  json out{{"mse_spectral_wb", pf},
           {"t_logmse_db", TimeLogMse(est.samples, ref.samples, cfg.eps)},
           {"mc_db", mc},
           {"cc_db", cc},
           {"mcc_db", McCLoss(mc, cc, cfg.beta_mcc)},
           {"frames", e.size()}};
  if (grid.has_upper_band()) {
    out["bwe_db"] =
        SequenceBweLoss(UpperBandMagnitudes(e), UpperBandMagnitudes(r), cfg);
  }
  if (!aec_est_path.empty() && !aec_ref_path.empty()) {
    const AudioBuffer ae = ReadWav(aec_est_path);
    const AudioBuffer ar = ReadWav(aec_ref_path);
    const double aec = SequenceSpectralLoss(LossFrames(ae), LossFrames(ar), wb_bins);
    out["mse_spectral_aec"] = aec;
    out["joint"] = JointLoss(aec, pf, cfg.alpha_joint);
  }
  const std::string text = out.dump(2) + "\n";
  if (report.empty()) {
    std::cout << text;
  } else {
    WriteText(report, text);
  }
  return 0;
}

int RunBweCheck(const std::string& path) {
  const BweWeights w = LoadBweWeights(path);
  json out{{"file", path},
           {"crc", "ok"},
           {"theta", w.theta},
           {"parameters", w.ParameterCount()}};
  out["layers"] = json::array();
  for (const DenseLayer& l : w.layers) {
    out["layers"].push_back({{"rows", l.rows}, {"cols", l.cols}});
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int Main(int argc, char** argv) {
  CLI::App app{"Bandwidth-scalable echo cancellation pipeline"};
  app.require_subcommand(1);

  PipelineFlags process_flags;
  std::string mic_path, far_path, out_path;
  bool process_pcm16 = false;
  CLI::App* process = app.add_subcommand("process", "Process mic + far-end WAVs");
  process->add_option("mic", mic_path, "Microphone WAV")->required()->check(CLI::ExistingFile);
  process->add_option("farend", far_path, "Far-end WAV")->required()->check(CLI::ExistingFile);
  process->add_option("-o,--out", out_path, "Output WAV")->required();
  process->add_flag("--pcm16", process_pcm16, "Write 16-bit PCM");
  AddPipelineFlags(process, process_flags);

  ScenarioFlags sim_flags;
  std::string sim_dir, sim_spec;
  int sim_rate = 48000;
  bool sim_pcm16 = false;
  CLI::App* simulate = app.add_subcommand("simulate", "Write a synthetic scenario");
  simulate->add_option("-o,--out-dir", sim_dir, "Output directory")->required();
  simulate->add_option("--spec", sim_spec, "Scenario JSON (overrides flags)");
  simulate->add_option("--seed", sim_flags.seed, "Scenario seed");
  simulate->add_option("--sample-rate", sim_rate, "16000 or 48000");
  simulate->add_flag("--pcm16", sim_pcm16, "Write 16-bit PCM");
  AddScenarioFlags(simulate, sim_flags);

  PipelineFlags eval_flags;
  ScenarioFlags eval_scenario;
  std::vector<std::uint64_t> eval_seeds;
  std::string block_csv;
  CLI::App* evaluate = app.add_subcommand("evaluate", "Black-box metrics on synthetic scenarios");
  AddPipelineFlags(evaluate, eval_flags);
  AddScenarioFlags(evaluate, eval_scenario);
  evaluate->add_option("--seed", eval_seeds, "Scenario seed(s)");
  evaluate->add_option("--block-csv", block_csv, "Per-block ERLE of the first run");

  std::string loss_est, loss_ref, loss_aec_est, loss_aec_ref, loss_report;
  CLI::App* losses = app.add_subcommand("losses", "Training objectives between two WAVs");
  losses->add_option("estimate", loss_est)->required()->check(CLI::ExistingFile);
  losses->add_option("reference", loss_ref)->required()->check(CLI::ExistingFile);
  losses->add_option("--aec-estimate", loss_aec_est)->check(CLI::ExistingFile);
  losses->add_option("--aec-target", loss_aec_ref)->check(CLI::ExistingFile);
  losses->add_option("--report", loss_report);

  std::string weights_path;
  CLI::App* bwe_check = app.add_subcommand("bwe-check", "Validate a BWEW v1 weight file");
  bwe_check->add_option("weights", weights_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*process) {
      return RunProcess(process_flags, mic_path, far_path, out_path, process_pcm16);
    }
    if (*simulate) return RunSimulate(sim_flags, sim_rate, sim_dir, sim_spec, sim_pcm16);
    if (*evaluate) {
      if (eval_seeds.empty()) eval_seeds.push_back(1);
      return RunEvaluate(eval_flags, eval_scenario, eval_seeds, block_csv);
    }
    if (*losses) {
      return RunLosses(loss_est, loss_ref, loss_aec_est, loss_aec_ref, loss_report);
    }
    if (*bwe_check) return RunBweCheck(weights_path);
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace
}  // namespace fbaec

int main(int argc, char** argv) { return fbaec::Main(argc, argv); }
