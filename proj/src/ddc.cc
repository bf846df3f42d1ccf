#include "fbaec/ddc.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#include "fbaec/errors.h"

namespace fbaec {
namespace {

constexpr double kPhatFloor = 1e-12;

void Linearize(const std::vector<double>& ring, std::int64_t written,
               std::vector<double>& out) {
  const std::size_t n = ring.size();
  const std::size_t start = static_cast<std::size_t>(written % n);
  out.resize(n);
  std::copy(ring.begin() + start, ring.end(), out.begin());
  std::copy(ring.begin(), ring.begin() + start, out.begin() + (n - start));
}

}  // namespace

DdcConfig DdcConfig::ForSampleRate(int sample_rate) {
  CheckSampleRate(sample_rate);
  DdcConfig cfg;
  cfg.sample_rate = sample_rate;
  cfg.frame_len = sample_rate * 106 / 100;
  cfg.frame_shift = cfg.frame_len / 4;
  cfg.stability_tol = sample_rate / 1000;
  cfg.max_delay = sample_rate;
  return cfg;
}

int DdcConfig::backoff_samples() const {
  return static_cast<int>(std::lround(backoff_ms * sample_rate / 1000.0));
}

int DdcConfig::band_first_bin() const {
  return static_cast<int>(
      std::ceil(band_lo_hz * frame_len / sample_rate - 1e-9));
}

int DdcConfig::band_last_bin() const {
  return static_cast<int>(
      std::floor(band_hi_hz * frame_len / sample_rate + 1e-9));
}

void DdcConfig::Validate() const {
  CheckSampleRate(sample_rate);
  if (!(smoothing > 0.0 && smoothing < 1.0)) {
    throw RangeError("ddc: smoothing must lie in (0, 1)");
  }
  if (!(band_lo_hz >= 0.0 && band_lo_hz < band_hi_hz &&
        band_hi_hz <= sample_rate / 2.0)) {
    throw RangeError("ddc: need 0 <= band_lo < band_hi <= sample_rate/2");
  }
  if (backoff_ms < 0.0) throw RangeError("ddc: backoff must be >= 0");
  if (frame_len < 2 || frame_shift < 1 || frame_shift > frame_len) {
    throw RangeError("ddc: invalid frame length/shift");
  }
  if (stability_frames < 1 || stability_tol < 0) {
    throw RangeError("ddc: invalid stability gate");
  }
  if (max_delay < 0 || max_delay >= frame_len) {
    throw RangeError("ddc: max_delay must lie in [0, frame_len)");
  }
}

DelayState DelayState::Fresh(const DdcConfig& cfg) {
  DelayState state;
  state.phi.assign(cfg.band_last_bin() - cfg.band_first_bin() + 1,
                   Complex(0.0, 0.0));
  return state;
}

GccPhatEstimator::GccPhatEstimator(const DdcConfig& cfg)
    : cfg_(cfg), fft_(cfg.frame_len) {
  cfg_.Validate();
}

int GccPhatEstimator::Estimate(DelayState& state,
                               std::span<const double> mic_frame,
                               std::span<const double> ref_frame) const {
  const int tau = EstimateFromPhi(state.phi, mic_frame, ref_frame);
  state.tau_inst = tau;
  ++state.frame_index;
  return tau;
}

int GccPhatEstimator::EstimateFromPhi(std::vector<Complex>& phi,
                                      std::span<const double> mic_frame,
                                      std::span<const double> ref_frame) const {
  const int n = cfg_.frame_len;
  if (static_cast<int>(mic_frame.size()) != n ||
      static_cast<int>(ref_frame.size()) != n) {
    throw DimensionError("ddc: frames must have length " + std::to_string(n));
  }
  const int first = cfg_.band_first_bin();
  const int count = cfg_.band_last_bin() - first + 1;
  if (static_cast<int>(phi.size()) != count) {
    throw DimensionError("ddc: phi does not match the configured band");
  }

  std::vector<Complex> mic_spec(fft_.num_bins());
  std::vector<Complex> ref_spec(fft_.num_bins());
  fft_.Forward(mic_frame, mic_spec);
  fft_.Forward(ref_frame, ref_spec);

  const double a = cfg_.smoothing;
  for (int i = 0; i < count; ++i) {
    const int k = first + i;
    phi[i] = a * phi[i] + (1.0 - a) * mic_spec[k] * std::conj(ref_spec[k]);
  }

  const std::vector<double> corr = Correlation(phi);
  const int last_lag = std::min(cfg_.max_delay, n - 1);
  int best = 0;
  for (int lag = 1; lag <= last_lag; ++lag) {
    if (corr[lag] > corr[best]) best = lag;
  }
  return best;
}

std::vector<double> GccPhatEstimator::Correlation(
    std::span<const Complex> phi) const {
  const int first = cfg_.band_first_bin();
  std::vector<Complex> spectrum(fft_.num_bins(), Complex(0.0, 0.0));
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const double mag = std::abs(phi[i]);
    if (mag >= kPhatFloor) spectrum[first + i] = phi[i] / mag;
  }
  std::vector<double> corr(cfg_.frame_len);
  fft_.Inverse(spectrum, corr);
  return corr;
}

void UpdateActiveDelay(DelayState& state, const DdcConfig& cfg) {
  if (state.previous_tau_inst &&
      std::abs(state.tau_inst - *state.previous_tau_inst) <=
          cfg.stability_tol) {
    ++state.stable_count;
  } else {
    state.stable_count = 1;
  }
  state.previous_tau_inst = state.tau_inst;

  if (state.stable_count < cfg.stability_frames) return;
  if (state.active_basis &&
      std::abs(state.tau_inst - *state.active_basis) <= cfg.stability_tol) {
    return;
  }
  state.tau_active = std::max(0, state.tau_inst - cfg.backoff_samples());
  state.active_basis = state.tau_inst;
}

ReferenceRingbuffer::ReferenceRingbuffer(int capacity) {
  if (capacity < 1) throw RangeError("ringbuffer capacity must be positive");
  data_.assign(capacity, 0.0);
}

void ReferenceRingbuffer::Write(double x) {
  data_[static_cast<std::size_t>(written_ % capacity())] = x;
  ++written_;
}

double ReferenceRingbuffer::Read(int delay) const {
  if (delay < 0 || delay >= capacity()) {
    throw RangeError("ringbuffer: delay " + std::to_string(delay) +
                     " exceeds capacity " + std::to_string(capacity()));
  }
  const std::int64_t index = written_ - 1 - delay;
  if (index < 0) return 0.0;
  return data_[static_cast<std::size_t>(index % capacity())];
}

std::vector<double> AlignReference(ReferenceRingbuffer& buffer, int tau,
                                   std::span<const double> input) {
  if (tau < 0 || tau >= buffer.capacity()) {
    throw RangeError("align_reference: delay exceeds ringbuffer capacity");
  }
  std::vector<double> out(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    buffer.Write(input[i]);
    out[i] = buffer.Read(tau);
  }
  return out;
}

DelayCompensator::DelayCompensator(const DdcConfig& cfg)
    : cfg_(cfg),
      estimator_(cfg),
      state_(DelayState::Fresh(cfg)),
      mic_history_(cfg.frame_len, 0.0),
      ref_history_(cfg.frame_len, 0.0),
      working_phi_(state_.phi) {}

DelayCompensator::~DelayCompensator() {
  for (Pending& p : pending_) {
    if (p.result.valid()) p.result.wait();
  }
}

void DelayCompensator::Push(double mic, double ref) {
  const std::size_t slot =
      static_cast<std::size_t>(samples_seen_ % cfg_.frame_len);
  mic_history_[slot] = mic;
  ref_history_[slot] = ref;
  ++samples_seen_;
  if (samples_seen_ >= cfg_.frame_len &&
      (samples_seen_ - cfg_.frame_len) % cfg_.frame_shift == 0) {
    Launch();
  }
}

void DelayCompensator::Wait(Pending& pending) {
  if (pending.value) return;
  pending.value = pending.result.get();
  state_.phi = working_phi_;
}

void DelayCompensator::Launch() {
  // Each estimate depends on the previous phi, so at most one is in flight.
  for (Pending& p : pending_) Wait(p);

  std::vector<double> mic_frame;
  std::vector<double> ref_frame;
  Linearize(mic_history_, samples_seen_, mic_frame);
  Linearize(ref_history_, samples_seen_, ref_frame);

  Pending pending;
  pending.ddc_frame = frames_launched_++;
  pending.frame_end = samples_seen_;
  pending.effective_at = samples_seen_ + cfg_.frame_shift;
  auto task = [this, mic = std::move(mic_frame), ref = std::move(ref_frame)] {
    return estimator_.EstimateFromPhi(working_phi_, mic, ref);
  };
  if (cfg_.concurrent) {
    pending.result = std::async(std::launch::async, std::move(task));
  } else {
    std::promise<int> done;
    done.set_value(task());
    pending.result = done.get_future();
  }
  pending_.push_back(std::move(pending));
}

void DelayCompensator::AdvanceTo(std::int64_t sample_count) {
  while (!pending_.empty() && pending_.front().effective_at <= sample_count) {
    Pending& p = pending_.front();
    Wait(p);
    state_.tau_inst = *p.value;
    state_.frame_index = p.ddc_frame;
    UpdateActiveDelay(state_, cfg_);
    trace_.push_back({p.ddc_frame, p.frame_end, p.effective_at,
                      state_.tau_inst, state_.tau_active});
    pending_.pop_front();
  }
}

}  // namespace fbaec
