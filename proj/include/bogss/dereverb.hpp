#pragma once

// Frame-recursive (RLS) weighted prediction error dereverberation.

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "bogss/stft.hpp"
#include "bogss/types.hpp"

namespace bogss {

struct WpeConfig {
  std::size_t taps = 2;
  std::size_t delay = 2;
  double decay = 0.9;
  /// Initial inverse correlation matrices are init_scale * I.
  double init_scale = 1.0;

  void validate() const;
};

class WpeState {
 public:
  WpeState(const WpeConfig& config, std::size_t num_freqs, std::size_t num_channels);

  const WpeConfig& config() const { return config_; }
  std::size_t num_freqs() const { return freqs_; }
  std::size_t num_channels() const { return channels_; }
  /// Dimension of the stacked history vector, channels * taps.
  std::size_t stacked_dim() const { return channels_ * config_.taps; }
  bool passthrough() const { return config_.taps == 0; }
  std::size_t history_len() const { return history_.size(); }
  std::size_t history_capacity() const {
    return passthrough() ? 0 : config_.taps + config_.delay - 1;
  }

  /// stacked_dim x stacked_dim, row-major.
  std::span<const cplx> inverse_correlation(std::size_t f) const {
    const std::size_t d = stacked_dim();
    return {inv_corr_.data() + f * d * d, d * d};
  }
  /// stacked_dim x channels, row-major.
  std::span<const cplx> filter(std::size_t f) const {
    const std::size_t d = stacked_dim();
    return {filters_.data() + f * d * channels_, d * channels_};
  }

 private:
  friend SpectralBlock wpe_process_block(WpeState& state, const SpectralBlock& block,
                                         std::size_t threads);

  WpeConfig config_;
  std::size_t freqs_, channels_;
  std::vector<cplx> inv_corr_;
  std::vector<cplx> filters_;
  // Raw input frames, each num_freqs * num_channels, oldest first.
  std::deque<std::vector<cplx>> history_;
};

WpeState wpe_init(const WpeConfig& config, std::size_t num_freqs, std::size_t num_channels);

/// Dereverberates one block and advances the state frame by frame. Frames
/// that do not yet have taps + delay - 1 frames of history pass through.
SpectralBlock wpe_process_block(WpeState& state, const SpectralBlock& block,
                                std::size_t threads = 1);

}  // namespace bogss
