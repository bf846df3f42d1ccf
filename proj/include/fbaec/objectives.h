#ifndef FBAEC_OBJECTIVES_H_
#define FBAEC_OBJECTIVES_H_

#include <span>
#include <vector>

#include "fbaec/spectral.h"

namespace fbaec {

struct LossConfig {
  double alpha_joint = 0.25;
  double beta_mcc = 0.7;
  double compress_exp = 0.3;
  double eps = 1e-12;
  double magnitude_floor = 1e-10;
  double overest_factor = 2.0;

  void Validate() const;
};

// (1/norm) * sum_k |a(k) - b(k)|^2. norm defaults to the bin count.
double MseSpectral(std::span<const Complex> a, std::span<const Complex> b,
                   double norm = 0.0);

// Per-frame MseSpectral over the first `num_bins` bins, averaged over frames.
// Used for both the AEC (noisy target) and the postfilter (clean target)
// losses. num_bins = 0 means all bins.
double SequenceSpectralLoss(std::span<const SpectralFrame> estimate,
                            std::span<const SpectralFrame> target,
                            int num_bins = 0);

double JointLoss(double aec_loss, double pf_loss, double alpha);

// 10*log10(eps + mean_n (est(n) - ref(n))^2).
double TimeLogMse(std::span<const double> estimate,
                  std::span<const double> reference, double eps);

// Per-frame compressed losses with exponent c.
double MagnitudeCompressedLoss(std::span<const Complex> estimate,
                               std::span<const Complex> target,
                               const LossConfig& cfg);
double ComplexCompressedLoss(std::span<const Complex> estimate,
                             std::span<const Complex> target,
                             const LossConfig& cfg);

// 10*log10(eps + mean of frame_losses).
double LogAggregate(std::span<const double> frame_losses, double eps);

// Sequence-level versions of the two compressed losses (log-aggregated).
double SequenceMagnitudeCompressedLoss(std::span<const SpectralFrame> estimate,
                                       std::span<const SpectralFrame> target,
                                       const LossConfig& cfg);
double SequenceComplexCompressedLoss(std::span<const SpectralFrame> estimate,
                                     std::span<const SpectralFrame> target,
                                     const LossConfig& cfg);

double McCLoss(double mc_loss, double cc_loss, double beta);

// Upper-band magnitude loss: squared error weighted by factor^2 where the
// estimate exceeds the reference.
double BweFrameLoss(std::span<const double> estimate,
                    std::span<const double> reference, double factor);
double SequenceBweLoss(std::span<const std::vector<double>> estimate,
                       std::span<const std::vector<double>> reference,
                       const LossConfig& cfg);

}  // namespace fbaec

#endif  // FBAEC_OBJECTIVES_H_
