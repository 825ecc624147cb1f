#pragma once

// Synthetic multichannel scenes with known references, and SI-SDR scoring.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "bogss/diarization.hpp"
#include "bogss/types.hpp"

namespace bogss {

struct SceneSpec {
  std::uint64_t seed = 0;
  std::size_t num_speakers = 2;
  std::size_t num_channels = 4;
  double duration_sec = 60.0;
  /// Time with two or more talkers over time with at least one.
  double overlap_ratio = 0.3;
  /// Spatially white noise level relative to the speech images while anyone
  /// talks; +inf for none.
  double snr_db = 15.0;
  /// Per-speaker, per-channel delays drift by up to 0.5 samples per second.
  bool moving = false;
  int sample_rate_hz = 16000;

  static constexpr double kNoNoise = std::numeric_limits<double>::infinity();
  void validate() const;
};

struct Scene {
  MultiSignal mixture;                // M channels
  std::vector<Signal> references;     // dry source per speaker
  std::vector<MultiSignal> images;    // per speaker, M channels
  MultiSignal noise;                  // M channels, zero when noiseless
  SegmentList segments;               // ground-truth activity, speakers "spk1".."spkN"
  std::vector<std::string> labels;    // speaker labels, index-aligned with references
};

/// Throws Error when the overlap target cannot be met.
Scene generate_scene(const SceneSpec& spec);

/// Time with at least two active segments over time with at least one.
double measure_overlap_ratio(const SegmentList& segments);

/// Total time covered by at least one segment.
double speech_union_seconds(const SegmentList& segments);

/// Scale-invariant SDR in dB, capped at +60. Throws Error on a zero reference
/// or unequal lengths.
double si_sdr(const Signal& estimate, const Signal& reference);

inline constexpr double kSiSdrCapDb = 60.0;

}  // namespace bogss
