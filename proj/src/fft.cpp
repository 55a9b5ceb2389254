#include "advcm/fft.hpp"

#include <cmath>
#include <stdexcept>

namespace advcm {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;

bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

size_t next_pow2(size_t n) {
  size_t m = 1;
  while (m < n) m <<= 1;
  return m;
}
}  // namespace

Dft::Dft(size_t n) : n_(n) {
  if (n == 0) throw std::invalid_argument("Dft: zero length");
  pow2_ = is_pow2(n);
  m_ = pow2_ ? n : next_pow2(2 * n - 1);

  bitrev_.resize(m_);
  size_t bits = 0;
  while ((size_t(1) << bits) < m_) ++bits;
  for (size_t i = 0; i < m_; ++i) {
    size_t r = 0;
    for (size_t b = 0; b < bits; ++b)
      if (i & (size_t(1) << b)) r |= size_t(1) << (bits - 1 - b);
    bitrev_[i] = r;
  }
  twiddle_.resize(m_ / 2);
  for (size_t i = 0; i < m_ / 2; ++i) {
    double a = -2.0 * kPi * static_cast<double>(i) / static_cast<double>(m_);
    twiddle_[i] = {std::cos(a), std::sin(a)};
  }

  if (!pow2_) {
    chirp_.resize(n_);
    for (size_t k = 0; k < n_; ++k) {
      // k^2 mod 2n keeps the phase argument small and exact.
      size_t k2 = (k * k) % (2 * n_);
      double a = -kPi * static_cast<double>(k2) / static_cast<double>(n_);
      chirp_[k] = {std::cos(a), std::sin(a)};
    }
    std::vector<std::complex<double>> filt(m_, {0.0, 0.0});
    filt[0] = std::conj(chirp_[0]);
    for (size_t k = 1; k < n_; ++k) {
      filt[k] = std::conj(chirp_[k]);
      filt[m_ - k] = std::conj(chirp_[k]);
    }
    pow2_fft(filt);
    filter_fft_ = std::move(filt);
  }
}

void Dft::pow2_fft(std::vector<std::complex<double>>& buf) const {
  const size_t m = m_;
  for (size_t i = 0; i < m; ++i) {
    size_t j = bitrev_[i];
    if (i < j) std::swap(buf[i], buf[j]);
  }
  for (size_t len = 2; len <= m; len <<= 1) {
    size_t half = len / 2;
    size_t step = m / len;
    for (size_t blk = 0; blk < m; blk += len) {
      for (size_t k = 0; k < half; ++k) {
        std::complex<double> w = twiddle_[k * step];
        std::complex<double> u = buf[blk + k];
        std::complex<double> v = buf[blk + k + half] * w;
        buf[blk + k] = u + v;
        buf[blk + k + half] = u - v;
      }
    }
  }
}

void Dft::forward(std::vector<std::complex<double>>& buf) const {
  if (buf.size() != n_) throw std::invalid_argument("Dft::forward: length mismatch");
  if (pow2_) {
    pow2_fft(buf);
    return;
  }
  std::vector<std::complex<double>> work(m_, {0.0, 0.0});
  for (size_t k = 0; k < n_; ++k) work[k] = buf[k] * chirp_[k];
  pow2_fft(work);
  for (size_t k = 0; k < m_; ++k) work[k] *= filter_fft_[k];
  // inverse pow-2 FFT via conjugation
  for (auto& v : work) v = std::conj(v);
  pow2_fft(work);
  double inv_m = 1.0 / static_cast<double>(m_);
  for (size_t k = 0; k < n_; ++k) buf[k] = std::conj(work[k]) * inv_m * chirp_[k];
}

void Dft::inverse(std::vector<std::complex<double>>& buf) const {
  if (buf.size() != n_) throw std::invalid_argument("Dft::inverse: length mismatch");
  for (auto& v : buf) v = std::conj(v);
  forward(buf);
  double inv_n = 1.0 / static_cast<double>(n_);
  for (auto& v : buf) v = std::conj(v) * inv_n;
}

}  // namespace advcm
