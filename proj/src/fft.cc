#include "fbaec/fft.h"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "fbaec/errors.h"

namespace fbaec {
namespace {

// The FFTW planner is not thread-safe; execution of an existing plan on
// caller-supplied arrays is. Plans are never destroyed.
std::mutex& PlannerMutex() {
  static std::mutex mutex;
  return mutex;
}

std::pair<fftw_plan, fftw_plan> PlansForSize(int size) {
  static std::map<int, std::pair<fftw_plan, fftw_plan>> cache;
  std::lock_guard<std::mutex> lock(PlannerMutex());
  auto it = cache.find(size);
  if (it != cache.end()) return it->second;

  // FFTW_UNALIGNED keeps results independent of buffer addresses, which the
  // bit-identical streaming guarantees rely on.
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  double* real = fftw_alloc_real(size);
  fftw_complex* spec = fftw_alloc_complex(size / 2 + 1);
  fftw_plan forward = fftw_plan_dft_r2c_1d(size, real, spec, flags);
  fftw_plan inverse = fftw_plan_dft_c2r_1d(size, spec, real, flags);
  fftw_free(real);
  fftw_free(spec);
  if (forward == nullptr || inverse == nullptr) {
    throw Error("FFTW planning failed for size " + std::to_string(size));
  }
  auto plans = std::make_pair(forward, inverse);
  cache.emplace(size, plans);
  return plans;
}

}  // namespace

RealFft::RealFft(int size) : size_(size) {
  if (size < 2) throw RangeError("DFT size must be at least 2");
  auto [forward, inverse] = PlansForSize(size);
  forward_plan_ = forward;
  inverse_plan_ = inverse;
}

void RealFft::Forward(std::span<const double> in,
                      std::span<std::complex<double>> out) const {
  if (static_cast<int>(in.size()) != size_ ||
      static_cast<int>(out.size()) != num_bins()) {
    throw DimensionError("RealFft::Forward: buffer size mismatch");
  }
  // r2c does not modify its input for 1-D transforms, but the API is not
  // const-qualified.
  std::vector<double> scratch(in.begin(), in.end());
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), scratch.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

void RealFft::Inverse(std::span<const std::complex<double>> in,
                      std::span<double> out) const {
  if (static_cast<int>(in.size()) != num_bins() ||
      static_cast<int>(out.size()) != size_) {
    throw DimensionError("RealFft::Inverse: buffer size mismatch");
  }
  // c2r destroys its input.
  std::vector<std::complex<double>> scratch(in.begin(), in.end());
  scratch.front().imag(0.0);
  if (size_ % 2 == 0) scratch.back().imag(0.0);
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_),
                       reinterpret_cast<fftw_complex*>(scratch.data()),
                       out.data());
  const double scale = 1.0 / size_;
  for (double& v : out) v *= scale;
}

}  // namespace fbaec
