#pragma once

// Utterance-wise offline guided source separation: full EM on the utterance
// and its symmetric context, then MVDR over the same window.

#include <cstddef>

#include "bogss/beamform.hpp"
#include "bogss/cacgmm.hpp"
#include "bogss/diarization.hpp"
#include "bogss/stft.hpp"
#include "bogss/types.hpp"

namespace bogss {

struct OfflineConfig {
  double context_sec = 10.0;
  std::size_t em_iterations = 20;
  StftConfig stft;
  CacgmmOptions cacgmm;
  BeamformerOptions beamformer;
  std::size_t threads = 1;

  void validate() const;
  /// Context length in frames, rounded to the nearest frame.
  std::size_t context_frames() const;
};

struct OfflineUtterance {
  std::size_t source = 0;
  std::size_t first_frame = 0;  // inclusive
  std::size_t last_frame = 0;   // inclusive
};

struct OfflineResult {
  CTensor2 spectra;  // (last - first + 1, F)
  std::size_t reference_channel = 0;
  std::size_t window_begin = 0, window_end = 0;  // frames [begin, end)
};

/// Reads only frames inside the utterance window: the utterance extended by
/// the context on both sides and clipped to the session.
OfflineResult enhance_utterance(const FreqPlanes& session, const ActivityMatrix& activities,
                                const OfflineUtterance& utterance, const OfflineConfig& config);

/// Frames [begin, end) of a plane set.
FreqPlanes slice_frames(const FreqPlanes& planes, std::size_t begin, std::size_t end);

}  // namespace bogss
