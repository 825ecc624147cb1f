#pragma once

// 16-bit PCM RIFF/WAVE input and output. Samples are scaled to [-1, 1).

#include <string>

#include "bogss/types.hpp"

namespace bogss {

struct WavData {
  int sample_rate_hz = 16000;
  MultiSignal channels;
};

/// Throws Error for anything other than uncompressed 16-bit PCM.
WavData read_wav(const std::string& path);

/// Clips to the 16-bit range.
void write_wav(const std::string& path, const MultiSignal& channels, int sample_rate_hz);

}  // namespace bogss
