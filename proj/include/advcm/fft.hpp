#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace advcm {

/// Reusable DFT plan for one transform length. Powers of two run the
/// iterative radix-2 kernel directly; any other length goes through
/// Bluestein's chirp-z reformulation on a padded power-of-two grid, so the
/// 1724-point analysis stays O(n log n).
class Dft {
 public:
  explicit Dft(size_t n);

  size_t size() const { return n_; }

  void forward(std::vector<std::complex<double>>& buf) const;
  /// Inverse transform including the 1/n factor.
  void inverse(std::vector<std::complex<double>>& buf) const;

 private:
  void pow2_fft(std::vector<std::complex<double>>& buf) const;

  size_t n_ = 0;
  bool pow2_ = false;
  // radix-2 machinery (used directly or inside Bluestein)
  size_t m_ = 0;  // padded power-of-two length
  std::vector<size_t> bitrev_;
  std::vector<std::complex<double>> twiddle_;
  // Bluestein chirps: a_k = exp(-i pi k^2 / n), and the FFT of the chirp filter
  std::vector<std::complex<double>> chirp_;
  std::vector<std::complex<double>> filter_fft_;
};

}  // namespace advcm
