#include "fbaec/objectives.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "fbaec/errors.h"

namespace fbaec {
namespace {

template <typename A, typename B>
void CheckSameLength(const A& a, const B& b, const char* what) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(what) + ": length mismatch (" +
                         std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
  }
}

template <typename A>
void CheckNonEmpty(const A& a, const char* what) {
  if (a.empty()) throw DimensionError(std::string(what) + ": empty input");
}

Complex Compress(const Complex& x, const LossConfig& cfg) {
  const double mag = std::abs(x);
  const double compressed = std::pow(std::max(mag, cfg.magnitude_floor),
                                     cfg.compress_exp);
  if (mag == 0.0) return Complex(compressed, 0.0);
  return x * (compressed / mag);
}

double CompressedMagnitude(const Complex& x, const LossConfig& cfg) {
  return std::pow(std::max(std::abs(x), cfg.magnitude_floor), cfg.compress_exp);
}

std::span<const Complex> Bins(const SpectralFrame& f) { return f.bins; }

}  // namespace

void LossConfig::Validate() const {
  if (!(alpha_joint >= 0.0 && alpha_joint <= 1.0)) {
    throw RangeError("loss: alpha must lie in [0, 1]");
  }
  if (!(beta_mcc >= 0.0 && beta_mcc <= 1.0)) {
    throw RangeError("loss: beta must lie in [0, 1]");
  }
  if (!(compress_exp > 0.0 && compress_exp <= 1.0)) {
    throw RangeError("loss: compression exponent must lie in (0, 1]");
  }
  if (!(eps > 0.0) || !(magnitude_floor > 0.0)) {
    throw RangeError("loss: eps and magnitude floor must be positive");
  }
  if (!(overest_factor > 0.0)) {
    throw RangeError("loss: overestimation factor must be positive");
  }
}

double MseSpectral(std::span<const Complex> a, std::span<const Complex> b,
                   double norm) {
  CheckSameLength(a, b, "mse_spectral");
  CheckNonEmpty(a, "mse_spectral");
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) sum += std::norm(a[k] - b[k]);
  return sum / (norm > 0.0 ? norm : static_cast<double>(a.size()));
}

double SequenceSpectralLoss(std::span<const SpectralFrame> estimate,
                            std::span<const SpectralFrame> target,
                            int num_bins) {
  CheckSameLength(estimate, target, "spectral loss");
  CheckNonEmpty(estimate, "spectral loss");
  double sum = 0.0;
  for (std::size_t l = 0; l < estimate.size(); ++l) {
    auto a = Bins(estimate[l]);
    auto b = Bins(target[l]);
    CheckSameLength(a, b, "spectral loss frame");
    if (num_bins > 0) {
      if (static_cast<std::size_t>(num_bins) > a.size()) {
        throw DimensionError("spectral loss: num_bins exceeds frame size");
      }
      a = a.first(num_bins);
      b = b.first(num_bins);
    }
    sum += MseSpectral(a, b);
  }
  return sum / static_cast<double>(estimate.size());
}

double JointLoss(double aec_loss, double pf_loss, double alpha) {
  return alpha * aec_loss + (1.0 - alpha) * pf_loss;
}

double TimeLogMse(std::span<const double> estimate,
                  std::span<const double> reference, double eps) {
  CheckSameLength(estimate, reference, "t-logmse");
  CheckNonEmpty(estimate, "t-logmse");
  double sum = 0.0;
  for (std::size_t n = 0; n < estimate.size(); ++n) {
    const double d = estimate[n] - reference[n];
    sum += d * d;
  }
  return 10.0 * std::log10(eps + sum / static_cast<double>(estimate.size()));
}

double MagnitudeCompressedLoss(std::span<const Complex> estimate,
                               std::span<const Complex> target,
                               const LossConfig& cfg) {
  CheckSameLength(estimate, target, "mC loss");
  CheckNonEmpty(estimate, "mC loss");
  double sum = 0.0;
  for (std::size_t k = 0; k < estimate.size(); ++k) {
    const double d =
        CompressedMagnitude(estimate[k], cfg) - CompressedMagnitude(target[k], cfg);
    sum += d * d;
  }
  return sum / static_cast<double>(estimate.size());
}

double ComplexCompressedLoss(std::span<const Complex> estimate,
                             std::span<const Complex> target,
                             const LossConfig& cfg) {
  CheckSameLength(estimate, target, "cC loss");
  CheckNonEmpty(estimate, "cC loss");
  double sum = 0.0;
  for (std::size_t k = 0; k < estimate.size(); ++k) {
    sum += std::norm(Compress(estimate[k], cfg) - Compress(target[k], cfg));
  }
  return sum / static_cast<double>(estimate.size());
}

double LogAggregate(std::span<const double> frame_losses, double eps) {
  CheckNonEmpty(frame_losses, "log aggregate");
  double sum = 0.0;
  for (double v : frame_losses) sum += v;
  return 10.0 * std::log10(eps + sum / static_cast<double>(frame_losses.size()));
}

double SequenceMagnitudeCompressedLoss(std::span<const SpectralFrame> estimate,
                                       std::span<const SpectralFrame> target,
                                       const LossConfig& cfg) {
  CheckSameLength(estimate, target, "mC loss");
  std::vector<double> per_frame(estimate.size());
  for (std::size_t l = 0; l < estimate.size(); ++l) {
    per_frame[l] =
        MagnitudeCompressedLoss(Bins(estimate[l]), Bins(target[l]), cfg);
  }
  return LogAggregate(per_frame, cfg.eps);
}

double SequenceComplexCompressedLoss(std::span<const SpectralFrame> estimate,
                                     std::span<const SpectralFrame> target,
                                     const LossConfig& cfg) {
  CheckSameLength(estimate, target, "cC loss");
  std::vector<double> per_frame(estimate.size());
  for (std::size_t l = 0; l < estimate.size(); ++l) {
    per_frame[l] = ComplexCompressedLoss(Bins(estimate[l]), Bins(target[l]), cfg);
  }
  return LogAggregate(per_frame, cfg.eps);
}

double McCLoss(double mc_loss, double cc_loss, double beta) {
  // Same as (1 - beta) * mc + beta * cc, but exact for the common cases.
  return mc_loss + beta * (cc_loss - mc_loss);
}

double BweFrameLoss(std::span<const double> estimate,
                    std::span<const double> reference, double factor) {
  CheckSameLength(estimate, reference, "bwe loss");
  CheckNonEmpty(estimate, "bwe loss");
  double sum = 0.0;
  for (std::size_t k = 0; k < estimate.size(); ++k) {
    const double delta = estimate[k] > reference[k] ? factor : 1.0;
    const double d = delta * estimate[k] - delta * reference[k];
    sum += d * d;
  }
  return sum / static_cast<double>(estimate.size());
}

double SequenceBweLoss(std::span<const std::vector<double>> estimate,
                       std::span<const std::vector<double>> reference,
                       const LossConfig& cfg) {
  CheckSameLength(estimate, reference, "bwe loss");
  std::vector<double> per_frame(estimate.size());
  for (std::size_t l = 0; l < estimate.size(); ++l) {
    per_frame[l] = BweFrameLoss(estimate[l], reference[l], cfg.overest_factor);
  }
  return LogAggregate(per_frame, cfg.eps);
}

}  // namespace fbaec
