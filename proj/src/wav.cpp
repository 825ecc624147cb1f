#include "bogss/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace bogss {
namespace {

std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
std::uint16_t le16(const unsigned char* p) { return std::uint16_t(p[0] | p[1] << 8); }

void put32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw Error(path + ": not a RIFF/WAVE file");

  std::size_t pos = 12;
  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = le32(bytes.data() + pos + 4);
    const unsigned char* body = bytes.data() + pos + 8;
    const std::size_t avail = std::min<std::size_t>(size, bytes.size() - pos - 8);
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
      if (avail < 16) throw Error(path + ": truncated fmt chunk");
      const std::uint16_t format = le16(body);
      channels = le16(body + 2);
      rate = le32(body + 4);
      bits = le16(body + 14);
      const bool extensible = format == 0xFFFE && avail >= 26 && le16(body + 24) == 1;
      if (format != 1 && !extensible) throw Error(path + ": only PCM audio is supported");
      if (bits != 16) throw Error(path + ": only 16-bit samples are supported");
      if (channels == 0) throw Error(path + ": no channels");
      have_fmt = true;
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      if (!have_fmt) throw Error(path + ": data chunk before fmt chunk");
      const std::size_t frames = avail / (2 * channels);
      WavData out;
      out.sample_rate_hz = static_cast<int>(rate);
      out.channels.assign(channels, Signal(frames));
      for (std::size_t i = 0; i < frames; ++i)
        for (std::size_t c = 0; c < channels; ++c) {
          const auto v = static_cast<std::int16_t>(le16(body + 2 * (i * channels + c)));
          out.channels[c][i] = v / 32768.0;
        }
      return out;
    }
    pos += 8 + size + (size & 1);
  }
  throw Error(path + ": no data chunk");
}

void write_wav(const std::string& path, const MultiSignal& channels, int sample_rate_hz) {
  if (channels.empty()) throw Error("cannot write a WAV file without channels");
  const std::size_t frames = channels[0].size();
  for (const auto& c : channels)
    if (c.size() != frames) throw Error("channel length mismatch");
  const auto nch = static_cast<std::uint16_t>(channels.size());
  const auto data_bytes = static_cast<std::uint32_t>(frames * nch * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, 1);
  put16(out, nch);
  put32(out, static_cast<std::uint32_t>(sample_rate_hz));
  put32(out, static_cast<std::uint32_t>(sample_rate_hz) * nch * 2);
  put16(out, static_cast<std::uint16_t>(nch * 2));
  put16(out, 16);
  out += "data";
  put32(out, data_bytes);
  for (std::size_t i = 0; i < frames; ++i)
    for (const auto& c : channels) {
      const double v = std::clamp(std::round(c[i] * 32768.0), -32768.0, 32767.0);
      put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
    }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error("cannot write " + path);
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw Error("failed writing " + path);
}

}  // namespace bogss
