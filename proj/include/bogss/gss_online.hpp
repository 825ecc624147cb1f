#pragma once

// Block-online guided source separation: one EM iteration per block over the
// block and its pre-context, followed by per-utterance MVDR emission.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "bogss/beamform.hpp"
#include "bogss/cacgmm.hpp"
#include "bogss/dereverb.hpp"
#include "bogss/diarization.hpp"
#include "bogss/stft.hpp"
#include "bogss/types.hpp"

namespace bogss {

enum class Strategy { accumulation, decay };

struct OnlineConfig {
  std::size_t block_len_frames = 150;
  std::size_t context_len_frames = 150;
  Strategy strategy = Strategy::decay;
  double eta = 0.9;
  double min_new_source_sec = 0.2;
  StftConfig stft;
  WpeConfig wpe;
  CacgmmOptions cacgmm;
  BeamformerOptions beamformer;
  std::size_t threads = 1;

  void validate() const;
};

/// Most recent C frames with their activities and posteriors.
class ContextQueue {
 public:
  struct Frame {
    std::size_t global_index = 0;
    std::vector<cplx> features;           // (F, M)
    std::vector<std::uint8_t> activity;   // one entry per source known at push time
    std::vector<double> posteriors;       // (F, K) with K = activity.size()
  };

  explicit ContextQueue(std::size_t capacity = 0) : capacity_(capacity) {}

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return frames_.size(); }
  bool empty() const { return frames_.empty(); }
  /// Global frame index of the oldest stored frame.
  std::size_t global_offset() const { return frames_.empty() ? 0 : frames_.front().global_index; }
  const Frame& operator[](std::size_t i) const { return frames_[i]; }
  Frame& operator[](std::size_t i) { return frames_[i]; }

  void push(Frame frame);

 private:
  std::size_t capacity_;
  std::deque<Frame> frames_;
};

struct SourceRecord {
  std::string label;
  bool admitted = false;
  std::optional<std::size_t> first_seen_block;
  /// Active time inside the block that (re)admitted the source.
  double active_sec_at_admission = 0.0;
  /// Admission saw too little activity; reset at the next block with activity.
  bool pending_readmission = false;
};

class SourceRegistry {
 public:
  SourceRegistry();

  /// K_n: noise plus the admitted speakers.
  std::size_t count() const;
  std::size_t width() const { return records_.size(); }
  const SourceRecord& operator[](std::size_t k) const { return records_[k]; }
  SourceRecord& operator[](std::size_t k) { return records_[k]; }
  void widen(const ActivityMatrix& activities);

 private:
  std::vector<SourceRecord> records_;
};

struct UtteranceId {
  std::size_t source = 0;
  std::size_t start_frame = 0;
  bool operator==(const UtteranceId&) const = default;
  auto operator<=>(const UtteranceId&) const = default;
};

/// Part of one utterance falling inside a block.
struct UtteranceSpan {
  UtteranceId id;
  std::size_t first_frame = 0;  // global, inclusive
  std::size_t last_frame = 0;   // global, inclusive
  bool finalized = false;
};

struct TrackerUpdate {
  std::vector<UtteranceSpan> spans;
  /// Utterances that were open at the previous block end and stopped there.
  std::vector<UtteranceId> closed;
};

/// Consecutive active frames of each speaker form one utterance; an
/// utterance still active at the block end stays open into the next block.
class UtteranceTracker {
 public:
  TrackerUpdate update(const ActivityMatrix& block_activities, std::size_t block_start);
  /// Closes everything still open.
  std::vector<UtteranceId> finish();

 private:
  std::vector<std::optional<std::size_t>> open_;
};

struct UtteranceSegment {
  std::string speaker;
  UtteranceId id;
  std::size_t start_frame = 0;  // global, inclusive
  std::size_t end_frame = 0;    // global, inclusive
  CTensor2 spectra;             // (end - start + 1, F)
  bool finalized = false;
  std::size_t reference_channel = 0;
};

struct BlockOutput {
  std::vector<UtteranceSegment> segments;
  std::vector<UtteranceId> closed;
  bool silent = false;
};

/// Sources with at least one active frame; noise always included.
SourceSet active_set(const ActivityMatrix& activities);

class OnlineEngine {
 public:
  OnlineEngine(const OnlineConfig& config, std::size_t num_channels);

  /// Consumes the next block (at most L frames) and its activities, whose
  /// width may grow but never shrink across blocks.
  BlockOutput process_block(const SpectralBlock& block, const ActivityMatrix& activities);
  /// Closes utterances still open at stream end.
  std::vector<UtteranceId> finish();

  const OnlineConfig& config() const { return config_; }
  const CacgmmState& state() const { return state_; }
  const ContextQueue& queue() const { return queue_; }
  const SourceRegistry& registry() const { return registry_; }
  const WpeState& wpe_state() const { return wpe_; }
  /// Posteriors over block plus context from the latest non-silent block.
  const PosteriorBlock& last_posteriors() const { return last_posteriors_; }
  /// Global index of the first frame covered by last_posteriors().
  std::size_t last_posteriors_offset() const { return last_offset_; }
  std::size_t blocks_processed() const { return blocks_; }
  std::size_t frames_processed() const { return next_frame_; }

 private:
  /// Stores the posteriors of the context frames and appends the block frames.
  void rotate_queue(const FreqPlanes& raw, const ActivityMatrix& acts, const PosteriorBlock& gammas,
                    std::size_t context_len, std::size_t block_start);

  OnlineConfig config_;
  std::size_t channels_;
  WpeState wpe_;
  CacgmmState state_;
  ContextQueue queue_;
  SourceRegistry registry_;
  UtteranceTracker tracker_;
  PosteriorBlock last_posteriors_;
  std::size_t last_offset_ = 0;
  std::size_t blocks_ = 0;
  std::size_t next_frame_ = 0;
};

}  // namespace bogss
