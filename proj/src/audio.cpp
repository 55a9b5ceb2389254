#include "advcm/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace advcm {

namespace {

uint32_t rd_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
uint16_t rd_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}
void wr_u32(std::ostream& os, uint32_t v) {
  uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                  static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}
void wr_u16(std::ostream& os, uint16_t v) {
  uint8_t b[2] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

}  // namespace

Waveform read_audio(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_audio: cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("read_audio: " + path + " is not a RIFF/WAVE file");

  bool have_fmt = false;
  uint16_t channels = 0, bits = 0, format = 0;
  uint32_t rate = 0;
  size_t pos = 12;
  const uint8_t* data = nullptr;
  uint32_t data_len = 0;
  while (pos + 8 <= bytes.size()) {
    char id[5] = {0};
    std::memcpy(id, bytes.data() + pos, 4);
    uint32_t len = rd_u32(bytes.data() + pos + 4);
    pos += 8;
    if (pos + len > bytes.size())
      throw std::runtime_error("read_audio: truncated chunk '" + std::string(id) + "' in " + path);
    if (std::strcmp(id, "fmt ") == 0) {
      if (len < 16) throw std::runtime_error("read_audio: malformed fmt chunk in " + path);
      format = rd_u16(bytes.data() + pos);
      channels = rd_u16(bytes.data() + pos + 2);
      rate = rd_u32(bytes.data() + pos + 4);
      bits = rd_u16(bytes.data() + pos + 14);
      have_fmt = true;
    } else if (std::strcmp(id, "data") == 0) {
      data = bytes.data() + pos;
      data_len = len;
    }
    pos += len + (len & 1);  // chunks are word-aligned
  }
  if (!have_fmt || !data) throw std::runtime_error("read_audio: missing fmt/data chunk in " + path);
  if (format != 1) throw std::runtime_error("read_audio: " + path + " is not PCM (format tag " +
                                            std::to_string(format) + ")");
  if (channels != 1)
    throw std::runtime_error("read_audio: " + path + " has " + std::to_string(channels) +
                             " channels; only mono is supported");
  if (bits != 16)
    throw std::runtime_error("read_audio: " + path + " has " + std::to_string(bits) +
                             "-bit samples; only 16-bit PCM is supported");
  if (rate == 0) throw std::runtime_error("read_audio: zero sample rate in " + path);
  if (data_len % 2 != 0) throw std::runtime_error("read_audio: odd data payload in " + path);

  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  size_t n = data_len / 2;
  w.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    int16_t s = static_cast<int16_t>(rd_u16(data + 2 * i));
    w.samples[i] = static_cast<float>(s) / 32768.0f;
  }
  return w;
}

void write_audio(const std::string& path, const Waveform& wave) {
  if (wave.sample_rate <= 0) throw std::invalid_argument("write_audio: non-positive sample rate");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("write_audio: cannot open " + path);
  uint32_t n = static_cast<uint32_t>(wave.samples.size());
  uint32_t data_len = n * 2;
  f.write("RIFF", 4);
  wr_u32(f, 36 + data_len);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  wr_u32(f, 16);
  wr_u16(f, 1);  // PCM
  wr_u16(f, 1);  // mono
  wr_u32(f, static_cast<uint32_t>(wave.sample_rate));
  wr_u32(f, static_cast<uint32_t>(wave.sample_rate) * 2);
  wr_u16(f, 2);   // block align
  wr_u16(f, 16);  // bits
  f.write("data", 4);
  wr_u32(f, data_len);
  for (uint32_t i = 0; i < n; ++i) {
    float v = std::clamp(wave.samples[i], -1.0f, 1.0f);
    long q = std::lround(static_cast<double>(v) * 32768.0);
    q = std::clamp(q, -32768L, 32767L);
    wr_u16(f, static_cast<uint16_t>(static_cast<int16_t>(q)));
  }
  if (!f) throw std::runtime_error("write_audio: write failed for " + path);
}

}  // namespace advcm
