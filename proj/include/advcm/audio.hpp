#pragma once

#include <string>
#include <vector>

namespace advcm {

/// Mono waveform with samples in [-1, 1].
struct Waveform {
  std::vector<float> samples;
  int sample_rate = 16000;
};

/// Reads a RIFF/WAVE file; only 16-bit PCM mono is accepted, anything else
/// (stereo, other encodings, truncated data) is a structured error.
Waveform read_audio(const std::string& path);

/// Writes 16-bit PCM mono; samples are clipped to [-1, 1] first.
void write_audio(const std::string& path, const Waveform& wave);

}  // namespace advcm
