#ifndef FBAEC_FFT_H_
#define FBAEC_FFT_H_

#include <complex>
#include <span>

namespace fbaec {

// Real-input DFT of arbitrary length backed by FFTW. Plans are created once
// per length and shared; Forward/Inverse are safe to call concurrently on the
// same object since every call uses its own buffers.
class RealFft {
 public:
  explicit RealFft(int size);

  int size() const { return size_; }
  int num_bins() const { return size_ / 2 + 1; }

  // Unnormalized forward transform: out[k] = sum_n in[n] e^{-j2pi kn/N}.
  void Forward(std::span<const double> in,
               std::span<std::complex<double>> out) const;

  // Inverse of Forward including the 1/N factor. The input is treated as
  // the one-sided half of a conjugate-symmetric spectrum; imaginary parts of
  // bin 0 and (for even N) bin N/2 are ignored.
  void Inverse(std::span<const std::complex<double>> in,
               std::span<double> out) const;

 private:
  int size_;
  void* forward_plan_;
  void* inverse_plan_;
};

}  // namespace fbaec

#endif  // FBAEC_FFT_H_
