#pragma once

#include <cstddef>
#include <vector>

#include "bogss/types.hpp"

namespace bogss {

enum class WindowKind { hann };

struct StftConfig {
  int sample_rate_hz = 16000;
  std::size_t window_len_samples = 1024;  // 64 ms
  std::size_t hop_samples = 256;          // 16 ms
  WindowKind window_kind = WindowKind::hann;

  std::size_t num_freqs() const { return window_len_samples / 2 + 1; }
  double frame_seconds(std::size_t frame) const {
    return static_cast<double>(frame) * static_cast<double>(hop_samples) / sample_rate_hz;
  }
  /// Throws Error on a violated invariant.
  void validate() const;
};

/// Complex STFT features, (T, F, M).
struct SpectralBlock {
  CTensor3 frames;
  std::size_t start_frame_index = 0;

  std::size_t num_frames() const { return frames.dim0(); }
  std::size_t num_freqs() const { return frames.dim1(); }
  std::size_t num_channels() const { return frames.dim2(); }
};

/// Periodic Hann window of the configured length.
std::vector<double> analysis_window(const StftConfig& config);

/// 1 + floor((samples - window) / hop), or 0 if shorter than one window.
std::size_t frame_count(std::size_t samples, const StftConfig& config);

/// Windowed DFT of every channel, non-negative frequencies only. Trailing
/// samples that do not fill a whole frame are dropped.
SpectralBlock analyze(const MultiSignal& audio, const StftConfig& config,
                      std::size_t start_frame_index = 0);

/// Weighted overlap-add inverse of analyze for one channel of (T, F) frames.
/// Output has (T - 1) * hop + window samples.
Signal synthesize(const CTensor2& frames, const StftConfig& config);

}  // namespace bogss
