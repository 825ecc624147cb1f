#include "bogss/diarization.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace bogss {

ActivityMatrix::ActivityMatrix(std::size_t frames, std::size_t sources)
    : frames_(frames), sources_(sources), data_(frames * sources, 0), labels_(sources) {
  if (sources == 0) throw Error("activity matrix needs the noise column");
  labels_[0] = "noise";
  for (std::size_t t = 0; t < frames; ++t) data_[t * sources_] = 1;
}

void ActivityMatrix::set(std::size_t t, std::size_t k, bool active) {
  if (k == 0 && !active) throw Error("the noise column is always active");
  data_.at(t * sources_ + k) = active ? 1 : 0;
}

std::size_t ActivityMatrix::index_of(const std::string& label) const {
  for (std::size_t k = 1; k < labels_.size(); ++k)
    if (labels_[k] == label) return k;
  return npos;
}

void ActivityMatrix::widen(std::size_t sources) {
  if (sources <= sources_) return;
  std::vector<std::uint8_t> wider(frames_ * sources, 0);
  for (std::size_t t = 0; t < frames_; ++t)
    std::copy_n(data_.begin() + t * sources_, sources_, wider.begin() + t * sources);
  data_ = std::move(wider);
  sources_ = sources;
  labels_.resize(sources);
}

ActivityMatrix ActivityMatrix::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > frames_) throw Error("activity slice out of range");
  ActivityMatrix out(end - begin, sources_);
  std::copy(data_.begin() + begin * sources_, data_.begin() + end * sources_, out.data_.begin());
  out.labels_ = labels_;
  return out;
}

std::size_t ActivityMatrix::active_frames(std::size_t k) const {
  std::size_t n = 0;
  for (std::size_t t = 0; t < frames_; ++t) n += data_[t * sources_ + k];
  return n;
}

SegmentList parse_segments(std::istream& in) {
  SegmentList out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string label;
    if (!(fields >> label)) continue;
    Segment seg{label, 0.0, 0.0};
    std::string extra;
    if (!(fields >> seg.start_sec >> seg.end_sec) || (fields >> extra))
      throw Error("segments line " + std::to_string(line_no) + ": expected `label start end`");
    if (seg.start_sec < 0.0)
      throw Error("segments line " + std::to_string(line_no) + ": negative start time");
    if (!(seg.end_sec > seg.start_sec))
      throw Error("segments line " + std::to_string(line_no) + ": end must be after start");
    out.push_back(std::move(seg));
  }
  return out;
}

SegmentList parse_segments_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open segments file " + path);
  return parse_segments(in);
}

void write_segments(std::ostream& out, const SegmentList& segments) {
  std::ostringstream buf;
  buf.precision(17);
  for (const auto& s : segments) buf << s.speaker << ' ' << s.start_sec << ' ' << s.end_sec << '\n';
  out << buf.str();
}

ActivityMatrix segments_to_activities(const SegmentList& segments, const StftConfig& stft,
                                      std::size_t num_frames) {
  ActivityMatrix out(num_frames, 1);
  for (const auto& seg : segments) {
    std::size_t k = out.index_of(seg.speaker);
    if (k == ActivityMatrix::npos) {
      k = out.num_sources();
      out.widen(k + 1);
      out.set_label(k, seg.speaker);
    }
    for (std::size_t t = 0; t < num_frames; ++t) {
      const double time = stft.frame_seconds(t);
      if (time >= seg.end_sec) break;
      if (time >= seg.start_sec) out.set(t, k, true);
    }
  }
  return out;
}

std::vector<ActivityRun> activity_runs(const ActivityMatrix& activities) {
  std::vector<ActivityRun> runs;
  for (std::size_t k = 1; k < activities.num_sources(); ++k) {
    std::size_t t = 0;
    while (t < activities.num_frames()) {
      if (!activities(t, k)) {
        ++t;
        continue;
      }
      const std::size_t first = t;
      while (t < activities.num_frames() && activities(t, k)) ++t;
      runs.push_back({k, first, t - 1});
    }
  }
  std::stable_sort(runs.begin(), runs.end(), [](const ActivityRun& a, const ActivityRun& b) {
    return a.first_frame != b.first_frame ? a.first_frame < b.first_frame : a.source < b.source;
  });
  return runs;
}

SegmentList activities_to_segments(const ActivityMatrix& activities, const StftConfig& stft) {
  SegmentList out;
  for (const auto& run : activity_runs(activities))
    out.push_back({activities.label(run.source), stft.frame_seconds(run.first_frame),
                   stft.frame_seconds(run.last_frame + 1)});
  return out;
}

}  // namespace bogss
