#pragma once

// End-to-end drivers: streaming online GSS over an audio source that
// refuses to count lookahead as harmless, and the utterance-wise offline
// path. Both produce per-utterance enhanced spectra and audio.

#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "bogss/diarization.hpp"
#include "bogss/gss_offline.hpp"
#include "bogss/gss_online.hpp"
#include "bogss/stft.hpp"
#include "bogss/types.hpp"

namespace bogss {

/// Multichannel audio read through a horizon the driver advances; every
/// sample requested beyond the horizon is counted as a lookahead violation.
class GuardedAudioSource {
 public:
  explicit GuardedAudioSource(const MultiSignal& audio);

  std::size_t num_channels() const { return audio_.size(); }
  std::size_t num_samples() const { return audio_.empty() ? 0 : audio_[0].size(); }

  void set_horizon(std::size_t samples) { horizon_ = samples; }
  std::size_t horizon() const { return horizon_; }
  /// Samples [begin, begin + count) of every channel.
  MultiSignal read(std::size_t begin, std::size_t count);

  std::size_t violations() const { return violations_; }
  /// One past the highest sample index ever read.
  std::size_t high_water() const { return high_water_; }

 private:
  const MultiSignal& audio_;
  std::size_t horizon_ = 0;
  std::size_t violations_ = 0;
  std::size_t high_water_ = 0;
};

struct EnhancedUtterance {
  std::string speaker;
  std::size_t source = 0;
  std::size_t first_frame = 0;  // inclusive
  std::size_t last_frame = 0;   // inclusive
  double start_sec = 0.0, end_sec = 0.0;
  CTensor2 spectra;                               // (T, F)
  std::vector<std::size_t> reference_channels;    // per frame
  Signal audio;
};

struct RunResult {
  std::vector<EnhancedUtterance> utterances;
  double audio_sec = 0.0;
  double speech_sec = 0.0;          // union of annotated speech, clipped to the audio
  double utterance_sum_sec = 0.0;   // sum of utterance lengths
  double processing_sec = 0.0;
  std::size_t lookahead_violations = 0;
  std::size_t blocks = 0;

  double real_time_factor() const;
};

/// Streams the source block by block through the online engine.
RunResult run_online(GuardedAudioSource& source, const SegmentList& segments,
                     const OnlineConfig& config);

/// Block-online WPE over the whole session, then offline GSS per utterance.
/// WPE and STFT settings come from `wpe_config`.
RunResult run_offline(const MultiSignal& audio, const SegmentList& segments,
                      const OnlineConfig& wpe_config, const OfflineConfig& config);

/// Spectra of `signal_stft` (T, F, M) over the utterance frames, taking each
/// frame from the channel the beamformer used as reference, synthesized.
Signal reference_projection(const SpectralBlock& signal_stft, const EnhancedUtterance& utterance,
                            const StftConfig& stft);

struct UtteranceScore {
  double enhanced_db = 0.0;
  double mixture_db = 0.0;
};

/// Per utterance, SI-SDR of the enhanced audio and of the mixture against the
/// speaker's reference, all projected through the utterance's reference
/// channels. Utterances whose speaker has no reference score nullopt.
std::vector<std::optional<UtteranceScore>> score_utterances(
    const RunResult& result, const std::map<std::string, SpectralBlock>& reference_stft,
    const SpectralBlock& mixture_stft, const StftConfig& stft);

struct UtteranceRecord {
  std::string speaker;
  double start_sec = 0.0, end_sec = 0.0;
  std::string path;
  std::size_t reference_channel = 0;
  std::optional<double> si_sdr_db;
  std::optional<double> mixture_si_sdr_db;
};

/// Totals plus one record per emitted utterance, written as `key=value`
/// lines followed by one tab-separated `utt` line per record.
struct RunReport {
  std::string mode;
  double audio_sec = 0.0, speech_sec = 0.0, utterance_sum_sec = 0.0;
  double processing_sec = 0.0, real_time_factor = 0.0;
  std::size_t lookahead_violations = 0, blocks = 0;
  std::vector<UtteranceRecord> records;

  void write(std::ostream& out) const;
};

RunReport make_report(const RunResult& result, const std::string& mode);

/// Output file name `<speaker>_<start_ms>_<end_ms>.wav`.
std::string utterance_file_name(const EnhancedUtterance& utterance);

}  // namespace bogss
