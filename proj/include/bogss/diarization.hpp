#pragma once

// Speaker-activity annotations: the segment text format and frame-aligned
// activity matrices with the always-on noise column.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <string>
#include <vector>

#include "bogss/stft.hpp"

namespace bogss {

struct Segment {
  std::string speaker;
  double start_sec = 0.0;
  double end_sec = 0.0;

  bool operator==(const Segment&) const = default;
};

using SegmentList = std::vector<Segment>;

/// Binary per-frame source activities. Column 0 is noise and always 1;
/// speaker columns follow in order of first appearance.
class ActivityMatrix {
 public:
  ActivityMatrix() : labels_{"noise"} {}
  ActivityMatrix(std::size_t frames, std::size_t sources);

  std::size_t num_frames() const { return frames_; }
  std::size_t num_sources() const { return sources_; }

  bool operator()(std::size_t t, std::size_t k) const { return data_[t * sources_ + k] != 0; }
  /// Throws Error when clearing the noise column.
  void set(std::size_t t, std::size_t k, bool active);

  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(std::size_t k) const { return labels_.at(k); }
  void set_label(std::size_t k, std::string label) { labels_.at(k) = std::move(label); }
  /// Index of a speaker label, or npos.
  std::size_t index_of(const std::string& label) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  /// Adds source columns (inactive) until there are `sources` in total.
  void widen(std::size_t sources);

  /// Rows [begin, end).
  ActivityMatrix slice(std::size_t begin, std::size_t end) const;

  /// Number of active frames of source k.
  std::size_t active_frames(std::size_t k) const;

  bool operator==(const ActivityMatrix&) const = default;

 private:
  std::size_t frames_ = 0, sources_ = 1;
  std::vector<std::uint8_t> data_;
  std::vector<std::string> labels_;
};

/// Lines of `label start_sec end_sec`; `#` starts a comment; blank lines
/// are skipped. LF and CRLF endings both accepted. Throws Error naming the
/// offending line.
SegmentList parse_segments(std::istream& in);
SegmentList parse_segments_file(const std::string& path);
void write_segments(std::ostream& out, const SegmentList& segments);

/// Frame t is active for a speaker iff one of its segments contains the
/// frame start time t * hop / sample_rate (start inclusive, end exclusive).
ActivityMatrix segments_to_activities(const SegmentList& segments, const StftConfig& stft,
                                      std::size_t num_frames);

/// Maximal runs of activity per speaker, converted back to seconds.
SegmentList activities_to_segments(const ActivityMatrix& activities, const StftConfig& stft);

/// One maximal run of consecutive active frames of one speaker.
struct ActivityRun {
  std::size_t source;
  std::size_t first_frame;
  std::size_t last_frame;  // inclusive

  bool operator==(const ActivityRun&) const = default;
};

/// All speaker runs, ordered by start frame then source.
std::vector<ActivityRun> activity_runs(const ActivityMatrix& activities);

}  // namespace bogss
