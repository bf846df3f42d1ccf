#include "fbaec/bwe.h"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "fbaec/errors.h"

namespace fbaec {
namespace {

constexpr std::uint32_t kBwewVersion = 1;
constexpr char kBwewMagic[4] = {'B', 'W', 'E', 'W'};

constexpr std::array<std::pair<int, int>, kBweLayerCount> kLayerShapes = {{
    {kBweHiddenSize, kBweInputSize},
    {kBweHiddenSize, kBweHiddenSize},
    {kBweHiddenSize, kBweHiddenSize},
    {kBweOutputSize, kBweHiddenSize},
}};

std::vector<double> LogInput(const BweWeights& weights,
                             std::span<const double> wb_magnitudes) {
  if (static_cast<int>(wb_magnitudes.size()) != kBweInputSize) {
    throw DimensionError("bwe: expected " + std::to_string(kBweInputSize) +
                         " wideband magnitudes");
  }
  std::vector<double> x(wb_magnitudes.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = std::log(std::max(wb_magnitudes[i], weights.log_floor));
  }
  return x;
}

double Neuron(const DenseLayer& layer, int row, const std::vector<double>& x) {
  const double* w = layer.weights.data() + static_cast<std::size_t>(row) *
                                               layer.cols;
  double acc = layer.bias[row];
  for (int c = 0; c < layer.cols; ++c) acc += w[c] * x[c];
  return acc;
}

void FinishLayer(std::vector<double>& y, bool is_output) {
  for (double& v : y) v = is_output ? std::exp(v) : std::max(0.0, v);
}

// Little-endian byte writer/reader.
class ByteWriter {
 public:
  void U32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back((v >> (8 * i)) & 0xff);
  }
  void F32(double v) { U32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void Raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint32_t U32() {
    if (pos_ + 4 > bytes_.size()) {
      throw FormatError("BWEW: unexpected end of data");
    }
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  double F32() { return std::bit_cast<float>(U32()); }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t Crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(
      crc32(crc, bytes.data(), static_cast<uInt>(bytes.size())));
}

}  // namespace

BweWeights BweWeights::Zeros() {
  BweWeights w;
  for (int i = 0; i < kBweLayerCount; ++i) {
    auto [rows, cols] = kLayerShapes[i];
    w.layers[i].rows = rows;
    w.layers[i].cols = cols;
    w.layers[i].weights.assign(static_cast<std::size_t>(rows) * cols, 0.0);
    w.layers[i].bias.assign(rows, 0.0);
  }
  return w;
}

BweWeights BweWeights::Random(std::uint64_t seed, double scale) {
  BweWeights w = Zeros();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (DenseLayer& layer : w.layers) {
    for (double& v : layer.weights) v = dist(rng);
    for (double& v : layer.bias) v = dist(rng);
  }
  return w;
}

void BweWeights::Validate() const {
  for (int i = 0; i < kBweLayerCount; ++i) {
    const DenseLayer& layer = layers[i];
    auto [rows, cols] = kLayerShapes[i];
    if (layer.rows != rows || layer.cols != cols) {
      throw DimensionError("bwe: layer " + std::to_string(i) + " is " +
                           std::to_string(layer.rows) + "x" +
                           std::to_string(layer.cols) + ", expected " +
                           std::to_string(rows) + "x" + std::to_string(cols));
    }
    if (layer.weights.size() != static_cast<std::size_t>(rows) * cols ||
        layer.bias.size() != static_cast<std::size_t>(rows)) {
      throw DimensionError("bwe: layer " + std::to_string(i) +
                           " storage does not match its shape");
    }
  }
  if (!(theta > 0.0)) throw RangeError("bwe: theta must be positive");
  if (!(log_floor > 0.0)) throw RangeError("bwe: log floor must be positive");
}

std::size_t BweWeights::ParameterCount() const {
  std::size_t n = 0;
  for (const DenseLayer& layer : layers) {
    n += layer.weights.size() + layer.bias.size();
  }
  return n;
}

std::vector<double> BweForward(const BweWeights& weights,
                               std::span<const double> wb_magnitudes) {
  weights.Validate();
  std::vector<double> x = LogInput(weights, wb_magnitudes);
  for (int i = 0; i < kBweLayerCount; ++i) {
    const DenseLayer& layer = weights.layers[i];
    std::vector<double> y(layer.rows);
#pragma omp parallel for schedule(static) if (layer.rows * layer.cols >= 65536)
    for (int r = 0; r < layer.rows; ++r) y[r] = Neuron(layer, r, x);
    FinishLayer(y, i == kBweLayerCount - 1);
    x = std::move(y);
  }
  return x;
}

namespace serial {
std::vector<double> BweForward(const BweWeights& weights,
                               std::span<const double> wb_magnitudes) {
  weights.Validate();
  std::vector<double> x = LogInput(weights, wb_magnitudes);
  for (int i = 0; i < kBweLayerCount; ++i) {
    const DenseLayer& layer = weights.layers[i];
    std::vector<double> y(layer.rows);
    for (int r = 0; r < layer.rows; ++r) y[r] = Neuron(layer, r, x);
    FinishLayer(y, i == kBweLayerCount - 1);
    x = std::move(y);
  }
  return x;
}
}  // namespace serial

double AttenuationGamma(std::span<const Complex> wb_bins,
                        std::span<const double> ub_amplitudes, double theta) {
  if (wb_bins.empty() || ub_amplitudes.empty()) {
    throw DimensionError("attenuation_gamma: empty band");
  }
  double p_wb = 0.0;
  for (const Complex& b : wb_bins) p_wb += std::norm(b);
  p_wb /= static_cast<double>(wb_bins.size());
  double p_ub = 0.0;
  for (double a : ub_amplitudes) p_ub += a * a;
  p_ub /= static_cast<double>(ub_amplitudes.size());

  if (p_wb == 0.0) return 0.0;
  if (p_ub == 0.0) return 1.0;
  return std::min(1.0, theta * std::sqrt(p_wb / p_ub));
}

std::vector<double> ExtendPhase(std::span<const double> wb_phases) {
  if (static_cast<int>(wb_phases.size()) != kBweOutputSize / 2) {
    throw DimensionError("extend_phase: expected " +
                         std::to_string(kBweOutputSize / 2) + " phases");
  }
  std::vector<double> out;
  out.reserve(kBweOutputSize);
  out.insert(out.end(), wb_phases.begin(), wb_phases.end());
  out.insert(out.end(), wb_phases.begin(), wb_phases.end());
  return out;
}

namespace {

void CheckFullbandGrid(const FrameGrid& grid) {
  if (grid.sample_rate != 48000 || grid.wb_cut_bin + 1 != kBweInputSize ||
      grid.num_onesided_bins != kBweInputSize + kBweOutputSize) {
    throw DimensionError("bandwidth extension requires the 48 kHz grid");
  }
}

std::vector<double> UpperBandPhases(const SpectralFrame& wb) {
  std::vector<double> phases(kBweOutputSize / 2);
  for (int k = 1; k <= kBweOutputSize / 2; ++k) {
    phases[k - 1] = std::arg(wb.bins[k]);
  }
  return ExtendPhase(phases);
}

}  // namespace

SpectralFrame AssembleFullband(const SpectralFrame& wb,
                               const UpperBandEstimate& ub) {
  CheckFullbandGrid(wb.grid);
  if (static_cast<int>(wb.bins.size()) != wb.grid.num_onesided_bins) {
    throw DimensionError("assemble_fullband: frame bin count mismatch");
  }
  if (static_cast<int>(ub.amplitudes.size()) != kBweOutputSize) {
    throw DimensionError("assemble_fullband: expected 512 amplitudes");
  }
  const std::vector<double> phases = UpperBandPhases(wb);
  SpectralFrame out = wb;
  for (int i = 0; i < kBweOutputSize; ++i) {
    out.bins[kBweInputSize + i] =
        std::polar(ub.gamma * ub.amplitudes[i], phases[i]);
  }
  out.bins.back().imag(0.0);
  return out;
}

SpectralFrame ExtendBandwidth(const BweWeights& weights,
                              const SpectralFrame& wb, double* gamma_out) {
  CheckFullbandGrid(wb.grid);
  std::vector<double> magnitudes(kBweInputSize);
  for (int k = 0; k < kBweInputSize; ++k) magnitudes[k] = std::abs(wb.bins[k]);

  UpperBandEstimate ub;
  ub.amplitudes = BweForward(weights, magnitudes);
  // The Nyquist bin is realized as a real value, so its effective amplitude
  // is the cosine projection. Accounting for that here keeps the mean upper
  // band power after assembly at exactly gamma^2 * P_ub.
  const double nyquist_phase = std::arg(wb.bins[kBweOutputSize / 2]);
  ub.amplitudes.back() = std::abs(ub.amplitudes.back() * std::cos(nyquist_phase));

  ub.gamma = AttenuationGamma(
      std::span<const Complex>(wb.bins.data(), kBweInputSize), ub.amplitudes,
      weights.theta);
  if (gamma_out != nullptr) *gamma_out = ub.gamma;
  SpectralFrame out = AssembleFullband(wb, ub);
  // Restore the sign the cosine projection carried.
  out.bins.back() = Complex(
      ub.gamma * ub.amplitudes.back() *
          (std::cos(nyquist_phase) < 0.0 ? -1.0 : 1.0),
      0.0);
  return out;
}

std::vector<std::uint8_t> SerializeBweWeights(const BweWeights& weights) {
  weights.Validate();
  ByteWriter w;
  w.Raw(kBwewMagic, 4);
  w.U32(kBwewVersion);
  w.U32(kBweLayerCount);
  for (const DenseLayer& layer : weights.layers) {
    w.U32(static_cast<std::uint32_t>(layer.rows));
    w.U32(static_cast<std::uint32_t>(layer.cols));
    for (double v : layer.weights) w.F32(v);
    for (double v : layer.bias) w.F32(v);
  }
  w.F32(weights.theta);
  const std::uint32_t crc = Crc32(w.bytes());
  w.U32(crc);
  return std::move(w.bytes());
}

BweWeights ParseBweWeights(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kBwewMagic, 4) != 0) {
    throw FormatError("BWEW: bad magic");
  }
  if (bytes.size() < 4 + 4 + 4 + 4 + 4) {
    throw FormatError("BWEW: file too short");
  }
  const auto body = bytes.first(bytes.size() - 4);
  ByteReader trailer(bytes.last(4));
  const std::uint32_t stored_crc = trailer.U32();
  const std::uint32_t actual_crc = Crc32(body);
  if (stored_crc != actual_crc) {
    throw FormatError("BWEW: CRC mismatch (file corrupt or truncated)");
  }

  ByteReader r(body.subspan(4));
  const std::uint32_t version = r.U32();
  if (version != kBwewVersion) {
    throw FormatError("BWEW: unsupported version " + std::to_string(version));
  }
  const std::uint32_t layer_count = r.U32();
  if (layer_count != kBweLayerCount) {
    throw FormatError("BWEW: expected 4 layers, found " +
                      std::to_string(layer_count));
  }
  BweWeights weights;
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    DenseLayer& layer = weights.layers[i];
    const std::uint32_t rows = r.U32();
    const std::uint32_t cols = r.U32();
    auto [want_rows, want_cols] = kLayerShapes[i];
    if (rows != static_cast<std::uint32_t>(want_rows) ||
        cols != static_cast<std::uint32_t>(want_cols)) {
      throw FormatError("BWEW: layer " + std::to_string(i) + " is " +
                        std::to_string(rows) + "x" + std::to_string(cols) +
                        ", expected " + std::to_string(want_rows) + "x" +
                        std::to_string(want_cols));
    }
    layer.rows = want_rows;
    layer.cols = want_cols;
    layer.weights.resize(static_cast<std::size_t>(rows) * cols);
    for (double& v : layer.weights) v = r.F32();
    layer.bias.resize(rows);
    for (double& v : layer.bias) v = r.F32();
  }
  weights.theta = r.F32();
  if (r.pos() + 4 != body.size()) {
    throw FormatError("BWEW: trailing bytes after theta");
  }
  weights.Validate();
  return weights;
}

BweWeights LoadBweWeights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open weight file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return ParseBweWeights(bytes);
}

void SaveBweWeights(const BweWeights& weights,
                    const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = SerializeBweWeights(weights);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write weight file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace fbaec
