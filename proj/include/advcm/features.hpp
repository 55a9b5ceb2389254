#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "advcm/audio.hpp"

namespace advcm {

/// Framing and spectral parameters. The 1724-sample Blackman window at a
/// 130-sample hop (0.0081 s at 16 kHz) yields 863 frequency bins; the first
/// 600 frames form the model input.
struct FeatureConfig {
  int window_len = 1724;
  int hop = 130;
  int n_frames = 600;
  double log_floor = 1e-10;
  int sample_rate = 16000;

  int n_bins() const { return window_len / 2 + 1; }
};

/// Log power magnitude spectrum plus the phase retained for resynthesis.
/// Matrices are row-major [n_bins][n_frames] (bin = row, frame = column).
struct SpectralFeature {
  FeatureConfig config;
  std::vector<float> log_power;
  std::vector<float> phase;
  int64_t original_length = 0;    // waveform samples
  int frames_from_signal = 0;     // leading frames computed from the signal;
                                  // later columns are cyclic repeats

  int n_bins() const { return config.n_bins(); }
  int n_frames() const { return config.n_frames; }
  float& lp(int bin, int frame) { return log_power[static_cast<size_t>(bin) * config.n_frames + frame]; }
  float lp(int bin, int frame) const { return log_power[static_cast<size_t>(bin) * config.n_frames + frame]; }
};

/// Frame t covers samples [t*hop, t*hop + window_len). Utterances shorter
/// than n_frames worth of audio are extended by cyclic frame repetition;
/// waveforms shorter than one window are zero-padded to a single frame.
SpectralFeature extract(const Waveform& wave, const FeatureConfig& cfg);

/// Weighted overlap-add resynthesis from the (possibly perturbed) log power
/// and the retained phase. Only frames computed from the signal are mapped
/// back; output is trimmed/padded to original_length and clipped to [-1, 1].
Waveform reconstruct(const SpectralFeature& feature);

/// Signal-to-noise ratio in dB of `test` against `ref` over [lo, hi).
double snr_db(const std::vector<float>& ref, const std::vector<float>& test, size_t lo, size_t hi);

/// Binary feature-block I/O (magic, version, dims, row-major float32; see
/// docs/FORMATS.md). `compact` stores only the frames that came from the
/// signal; loading re-expands them cyclically.
void save_feature(const std::string& path, const SpectralFeature& f, bool compact = false,
                  bool with_phase = true);
SpectralFeature load_feature(const std::string& path);

}  // namespace advcm
