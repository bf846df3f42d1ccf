#ifndef FBAEC_BWE_H_
#define FBAEC_BWE_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fbaec/spectral.h"

namespace fbaec {

constexpr int kBweInputSize = 257;   // wideband bins 0..256
constexpr int kBweHiddenSize = 256;
constexpr int kBweOutputSize = 512;  // upper band bins 257..768
constexpr int kBweLayerCount = 4;
constexpr double kBweDefaultTheta = 0.1;
constexpr double kBweLogFloor = 1e-10;

struct DenseLayer {
  int rows = 0;
  int cols = 0;
  std::vector<double> weights;  // row-major rows x cols
  std::vector<double> bias;     // rows
};

// Three ReLU layers of 256 nodes and a linear 512-node output, operating on
// log magnitudes.
struct BweWeights {
  std::array<DenseLayer, kBweLayerCount> layers;
  double theta = kBweDefaultTheta;
  double log_floor = kBweLogFloor;

  // All-zero weights and biases with the expected shapes.
  static BweWeights Zeros();
  // Uniform(-scale, scale) weights and biases from a seeded generator.
  static BweWeights Random(std::uint64_t seed, double scale);

  // Throws DimensionError on a broken layer chain, RangeError on theta <= 0.
  void Validate() const;
  std::size_t ParameterCount() const;
};

// exp(W4 relu(W3 relu(W2 relu(W1 ln(max(m, floor)) + b1) + b2) + b3) + b4).
// Output rows are evaluated in parallel.
std::vector<double> BweForward(const BweWeights& weights,
                               std::span<const double> wb_magnitudes);

struct UpperBandEstimate {
  std::vector<double> amplitudes;  // 512 values, bins 257..768
  double gamma = 1.0;
};

// min(1, theta * sqrt(P_wb / P_ub)) with P the mean bin power of each band.
// P_wb = 0 gives 0, otherwise P_ub = 0 gives 1.
double AttenuationGamma(std::span<const Complex> wb_bins,
                        std::span<const double> ub_amplitudes, double theta);

// Phases of bins 1..256 repeated twice, for bins 257..768.
std::vector<double> ExtendPhase(std::span<const double> wb_phases);

// Wideband bins unchanged, upper band = gamma * amplitude * e^{j phase}, with
// phases taken from the wideband bins. Requires the 48 kHz grid.
SpectralFrame AssembleFullband(const SpectralFrame& wb,
                               const UpperBandEstimate& ub);

// Full stage on one postfilter output frame. `gamma_out`, when given,
// receives the attenuation factor used.
SpectralFrame ExtendBandwidth(const BweWeights& weights,
                              const SpectralFrame& wb,
                              double* gamma_out = nullptr);

// BWEW v1 container: "BWEW", u32 version, u32 layer count, per layer
// {u32 rows, u32 cols, f32 matrix row-major, f32 bias}, f32 theta, u32 CRC-32
// of everything before it. Little-endian.
std::vector<std::uint8_t> SerializeBweWeights(const BweWeights& weights);
BweWeights ParseBweWeights(std::span<const std::uint8_t> bytes);
BweWeights LoadBweWeights(const std::filesystem::path& path);
void SaveBweWeights(const BweWeights& weights,
                    const std::filesystem::path& path);

namespace serial {
std::vector<double> BweForward(const BweWeights& weights,
                               std::span<const double> wb_magnitudes);
}  // namespace serial

}  // namespace fbaec

#endif  // FBAEC_BWE_H_
