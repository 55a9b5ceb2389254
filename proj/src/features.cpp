#include "advcm/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "advcm/fft.hpp"

namespace advcm {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr char kMagic[8] = {'A', 'D', 'V', 'C', 'M', 'F', 'T', '1'};

std::vector<double> blackman(int n) {
  // Classic symmetric Blackman window.
  std::vector<double> w(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    double x = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n - 1);
    w[i] = 0.42 - 0.5 * std::cos(x) + 0.08 * std::cos(2.0 * x);
  }
  return w;
}

void validate_config(const FeatureConfig& cfg) {
  if (cfg.window_len <= 1) throw std::invalid_argument("FeatureConfig: window_len must exceed 1");
  if (cfg.hop <= 0 || cfg.hop > cfg.window_len)
    throw std::invalid_argument("FeatureConfig: hop must satisfy 0 < hop <= window_len");
  if (cfg.n_frames <= 0) throw std::invalid_argument("FeatureConfig: n_frames must be positive");
  if (!(cfg.log_floor > 0.0)) throw std::invalid_argument("FeatureConfig: log_floor must be positive");
  if (cfg.sample_rate <= 0) throw std::invalid_argument("FeatureConfig: sample_rate must be positive");
}

template <class T>
void wr(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T rd(std::istream& is, const char* what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw std::runtime_error(std::string("load_feature: truncated file reading ") + what);
  return v;
}

}  // namespace

SpectralFeature extract(const Waveform& wave, const FeatureConfig& cfg) {
  validate_config(cfg);
  if (wave.samples.empty()) throw std::invalid_argument("extract: empty waveform");
  for (float v : wave.samples)
    if (!std::isfinite(v)) throw std::invalid_argument("extract: non-finite sample");

  const int n = cfg.window_len;
  const int bins = cfg.n_bins();
  const int64_t len = static_cast<int64_t>(wave.samples.size());
  int64_t avail = len >= n ? (len - n) / cfg.hop + 1 : 1;
  const int nreal = static_cast<int>(std::min<int64_t>(avail, cfg.n_frames));

  SpectralFeature f;
  f.config = cfg;
  f.original_length = len;
  f.frames_from_signal = nreal;
  f.log_power.assign(static_cast<size_t>(bins) * cfg.n_frames, 0.0f);
  f.phase.assign(static_cast<size_t>(bins) * cfg.n_frames, 0.0f);

  const std::vector<double> win = blackman(n);
  Dft dft(static_cast<size_t>(n));
  std::vector<std::complex<double>> buf(static_cast<size_t>(n));
  const double floor_ln = std::log(cfg.log_floor);

  for (int t = 0; t < nreal; ++t) {
    int64_t start = static_cast<int64_t>(t) * cfg.hop;
    for (int i = 0; i < n; ++i) {
      int64_t s = start + i;
      double v = s < len ? static_cast<double>(wave.samples[static_cast<size_t>(s)]) : 0.0;
      buf[i] = {v * win[i], 0.0};
    }
    dft.forward(buf);
    for (int b = 0; b < bins; ++b) {
      double re = buf[b].real(), im = buf[b].imag();
      double p = re * re + im * im;
      double lp = p > cfg.log_floor ? std::log(p) : floor_ln;
      double ph = std::atan2(im, re);
      if (ph <= -kPi) ph = kPi;  // keep phase in (-pi, pi]
      f.lp(b, t) = static_cast<float>(lp);
      f.phase[static_cast<size_t>(b) * cfg.n_frames + t] = static_cast<float>(ph);
    }
  }
  // Cyclic repetition up to the fixed frame count.
  for (int t = nreal; t < cfg.n_frames; ++t) {
    int src = t % nreal;
    for (int b = 0; b < bins; ++b) {
      f.lp(b, t) = f.lp(b, src);
      f.phase[static_cast<size_t>(b) * cfg.n_frames + t] =
          f.phase[static_cast<size_t>(b) * cfg.n_frames + src];
    }
  }
  return f;
}

Waveform reconstruct(const SpectralFeature& feature) {
  const FeatureConfig& cfg = feature.config;
  validate_config(cfg);
  const int n = cfg.window_len;
  const int bins = cfg.n_bins();
  if (feature.log_power.size() != static_cast<size_t>(bins) * cfg.n_frames ||
      feature.phase.size() != feature.log_power.size())
    throw std::invalid_argument("reconstruct: log_power/phase do not match the config dimensions");
  const int nf = std::min(std::max(feature.frames_from_signal, 1), cfg.n_frames);

  const std::vector<double> win = blackman(n);
  Dft dft(static_cast<size_t>(n));
  const int64_t span = static_cast<int64_t>(nf - 1) * cfg.hop + n;
  std::vector<double> acc(static_cast<size_t>(span), 0.0);
  std::vector<double> den(static_cast<size_t>(span), 0.0);
  std::vector<std::complex<double>> buf(static_cast<size_t>(n));

  for (int t = 0; t < nf; ++t) {
    for (int b = 0; b < bins; ++b) {
      double mag = std::exp(0.5 * static_cast<double>(feature.lp(b, t)));
      double ph = static_cast<double>(feature.phase[static_cast<size_t>(b) * cfg.n_frames + t]);
      buf[b] = std::polar(mag, ph);
    }
    for (int b = 1; b < bins - (n % 2 == 0 ? 1 : 0); ++b) buf[n - b] = std::conj(buf[b]);
    dft.inverse(buf);
    int64_t start = static_cast<int64_t>(t) * cfg.hop;
    for (int i = 0; i < n; ++i) {
      acc[start + i] += win[i] * buf[i].real();
      den[start + i] += win[i] * win[i];
    }
  }

  Waveform out;
  out.sample_rate = cfg.sample_rate;
  int64_t outlen = feature.original_length > 0 ? feature.original_length : span;
  out.samples.assign(static_cast<size_t>(outlen), 0.0f);
  constexpr double kDenFloor = 1e-8;
  int64_t copy = std::min<int64_t>(outlen, span);
  for (int64_t i = 0; i < copy; ++i) {
    double v = acc[i] / std::max(den[i], kDenFloor);
    out.samples[static_cast<size_t>(i)] = static_cast<float>(std::clamp(v, -1.0, 1.0));
  }
  return out;
}

double snr_db(const std::vector<float>& ref, const std::vector<float>& test, size_t lo, size_t hi) {
  hi = std::min({hi, ref.size(), test.size()});
  if (lo >= hi) throw std::invalid_argument("snr_db: empty interval");
  double sig = 0.0, err = 0.0;
  for (size_t i = lo; i < hi; ++i) {
    double r = ref[i];
    double e = static_cast<double>(test[i]) - r;
    sig += r * r;
    err += e * e;
  }
  if (err == 0.0) return 300.0;  // exact match, report a large finite value
  if (sig == 0.0) return -300.0;
  return 10.0 * std::log10(sig / err);
}

void save_feature(const std::string& path, const SpectralFeature& f, bool compact, bool with_phase) {
  validate_config(f.config);
  const int bins = f.n_bins();
  const int total = f.config.n_frames;
  const int stored = compact ? std::min(std::max(f.frames_from_signal, 1), total) : total;
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_feature: cannot open " + path);
  os.write(kMagic, 8);
  wr<uint32_t>(os, 1);  // version
  wr<uint32_t>(os, static_cast<uint32_t>(bins));
  wr<uint32_t>(os, static_cast<uint32_t>(stored));
  wr<uint32_t>(os, static_cast<uint32_t>(total));
  wr<uint32_t>(os, static_cast<uint32_t>(f.frames_from_signal));
  wr<uint32_t>(os, static_cast<uint32_t>(f.config.sample_rate));
  wr<uint32_t>(os, static_cast<uint32_t>(f.config.window_len));
  wr<uint32_t>(os, static_cast<uint32_t>(f.config.hop));
  wr<uint64_t>(os, static_cast<uint64_t>(f.original_length));
  wr<double>(os, f.config.log_floor);
  wr<uint8_t>(os, with_phase ? 1 : 0);
  for (int b = 0; b < bins; ++b)
    os.write(reinterpret_cast<const char*>(f.log_power.data() + static_cast<size_t>(b) * total),
             sizeof(float) * static_cast<size_t>(stored));
  if (with_phase)
    for (int b = 0; b < bins; ++b)
      os.write(reinterpret_cast<const char*>(f.phase.data() + static_cast<size_t>(b) * total),
               sizeof(float) * static_cast<size_t>(stored));
  if (!os) throw std::runtime_error("save_feature: write failed for " + path);
}

SpectralFeature load_feature(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_feature: cannot open " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("load_feature: " + path + " is not a feature block");
  uint32_t version = rd<uint32_t>(is, "version");
  if (version != 1)
    throw std::runtime_error("load_feature: unsupported version " + std::to_string(version));
  uint32_t bins = rd<uint32_t>(is, "bins");
  uint32_t stored = rd<uint32_t>(is, "stored frames");
  uint32_t total = rd<uint32_t>(is, "total frames");
  uint32_t from_signal = rd<uint32_t>(is, "signal frames");
  uint32_t rate = rd<uint32_t>(is, "sample rate");
  uint32_t window_len = rd<uint32_t>(is, "window length");
  uint32_t hop = rd<uint32_t>(is, "hop");
  uint64_t original_length = rd<uint64_t>(is, "original length");
  double log_floor = rd<double>(is, "log floor");
  uint8_t has_phase = rd<uint8_t>(is, "phase flag");
  if (stored == 0 || stored > total)
    throw std::runtime_error("load_feature: inconsistent frame counts in " + path);

  SpectralFeature f;
  f.config.window_len = static_cast<int>(window_len);
  f.config.hop = static_cast<int>(hop);
  f.config.n_frames = static_cast<int>(total);
  f.config.log_floor = log_floor;
  f.config.sample_rate = static_cast<int>(rate);
  validate_config(f.config);
  if (bins != static_cast<uint32_t>(f.config.n_bins()))
    throw std::runtime_error("load_feature: bin count does not match window length in " + path);
  f.original_length = static_cast<int64_t>(original_length);
  f.frames_from_signal = static_cast<int>(from_signal);
  f.log_power.assign(static_cast<size_t>(bins) * total, 0.0f);
  f.phase.assign(static_cast<size_t>(bins) * total, 0.0f);

  auto read_plane = [&](std::vector<float>& dst, const char* what) {
    std::vector<float> rowbuf(stored);
    for (uint32_t b = 0; b < bins; ++b) {
      if (!is.read(reinterpret_cast<char*>(rowbuf.data()), sizeof(float) * stored))
        throw std::runtime_error(std::string("load_feature: truncated ") + what + " in " + path);
      float* row = dst.data() + static_cast<size_t>(b) * total;
      std::memcpy(row, rowbuf.data(), sizeof(float) * stored);
      for (uint32_t t = stored; t < total; ++t) row[t] = row[t % stored];
    }
  };
  read_plane(f.log_power, "log power");
  if (has_phase) read_plane(f.phase, "phase");
  return f;
}

}  // namespace advcm
