#include "bogss/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "bogss/dereverb.hpp"
#include "bogss/eval.hpp"

namespace bogss {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Samples covering frames [first, last) of the STFT grid.
std::pair<std::size_t, std::size_t> frame_samples(std::size_t first, std::size_t last,
                                                  const StftConfig& stft) {
  const std::size_t begin = first * stft.hop_samples;
  const std::size_t end = (last - 1) * stft.hop_samples + stft.window_len_samples;
  return {begin, end};
}

MultiSignal slice_samples(const MultiSignal& audio, std::size_t begin, std::size_t end) {
  MultiSignal out;
  out.reserve(audio.size());
  for (const auto& c : audio) out.emplace_back(c.begin() + begin, c.begin() + end);
  return out;
}

double clipped_speech(const SegmentList& segments, double audio_sec) {
  SegmentList clipped;
  for (const auto& s : segments) {
    const double a = std::max(0.0, s.start_sec), b = std::min(audio_sec, s.end_sec);
    if (b > a) clipped.push_back({s.speaker, a, b});
  }
  return speech_union_seconds(clipped);
}

void check_audio(const MultiSignal& audio) {
  if (audio.empty()) throw Error("no audio channels");
  for (const auto& c : audio)
    if (c.size() != audio[0].size()) throw Error("channel length mismatch");
}

void finish_utterance(EnhancedUtterance& utt, const StftConfig& stft) {
  utt.start_sec = stft.frame_seconds(utt.first_frame);
  utt.end_sec = stft.frame_seconds(utt.last_frame + 1);
  utt.audio = synthesize(utt.spectra, stft);
}

void sort_utterances(std::vector<EnhancedUtterance>& utts) {
  std::stable_sort(utts.begin(), utts.end(), [](const auto& a, const auto& b) {
    return a.first_frame != b.first_frame ? a.first_frame < b.first_frame : a.source < b.source;
  });
}

/// Concatenates block segments per utterance until it is finalized.
class UtteranceAssembler {
 public:
  UtteranceAssembler(const StftConfig& stft) : stft_(stft) {}

  void add(const UtteranceSegment& seg) {
    auto& parts = open_[seg.id];
    parts.push_back(seg);
    if (seg.finalized) close(seg.id);
  }

  void close(const UtteranceId& id) {
    auto it = open_.find(id);
    if (it == open_.end()) return;
    const auto& parts = it->second;
    EnhancedUtterance utt;
    utt.speaker = parts.front().speaker;
    utt.source = id.source;
    utt.first_frame = parts.front().start_frame;
    utt.last_frame = parts.back().end_frame;
    const std::size_t freqs = parts.front().spectra.cols();
    utt.spectra = CTensor2(utt.last_frame - utt.first_frame + 1, freqs);
    for (const auto& p : parts) {
      if (p.start_frame != utt.first_frame + utt.reference_channels.size())
        throw Error("utterance segments are not contiguous");
      for (std::size_t t = 0; t < p.spectra.rows(); ++t) {
        const std::size_t row = p.start_frame - utt.first_frame + t;
        for (std::size_t f = 0; f < freqs; ++f) utt.spectra(row, f) = p.spectra(t, f);
        utt.reference_channels.push_back(p.reference_channel);
      }
    }
    finish_utterance(utt, stft_);
    done_.push_back(std::move(utt));
    open_.erase(it);
  }

  std::vector<EnhancedUtterance> take() { return std::move(done_); }
  bool idle() const { return open_.empty(); }

 private:
  StftConfig stft_;
  std::map<UtteranceId, std::vector<UtteranceSegment>> open_;
  std::vector<EnhancedUtterance> done_;
};

}  // namespace

GuardedAudioSource::GuardedAudioSource(const MultiSignal& audio) : audio_(audio) { check_audio(audio); }

MultiSignal GuardedAudioSource::read(std::size_t begin, std::size_t count) {
  if (begin + count > num_samples()) throw Error("audio read past the end of the stream");
  const std::size_t end = begin + count;
  if (end > horizon_) violations_ += end - std::max(begin, horizon_);
  high_water_ = std::max(high_water_, end);
  return slice_samples(audio_, begin, end);
}

double RunResult::real_time_factor() const {
  return speech_sec > 0.0 ? processing_sec / speech_sec : std::numeric_limits<double>::infinity();
}

RunResult run_online(GuardedAudioSource& source, const SegmentList& segments,
                     const OnlineConfig& config) {
  config.validate();
  const auto& stft = config.stft;
  RunResult result;
  result.audio_sec = static_cast<double>(source.num_samples()) / stft.sample_rate_hz;
  result.speech_sec = clipped_speech(segments, result.audio_sec);
  const auto start = Clock::now();

  const std::size_t frames = frame_count(source.num_samples(), stft);
  const ActivityMatrix activities = segments_to_activities(segments, stft, frames);
  OnlineEngine engine(config, source.num_channels());
  UtteranceAssembler assembler(stft);
  const std::size_t block_len = config.block_len_frames;
  for (std::size_t first = 0; first < frames; first += block_len) {
    const std::size_t last = std::min(frames, first + block_len);
    const auto [begin, end] = frame_samples(first, last, stft);
    source.set_horizon(end);
    const SpectralBlock block = analyze(source.read(begin, end - begin), stft, first);
    const BlockOutput out = engine.process_block(block, activities.slice(first, last));
    for (const auto& id : out.closed) assembler.close(id);
    for (const auto& seg : out.segments) assembler.add(seg);
    ++result.blocks;
  }
  for (const auto& id : engine.finish()) assembler.close(id);

  result.utterances = assembler.take();
  sort_utterances(result.utterances);
  result.processing_sec = seconds_since(start);
  for (const auto& u : result.utterances) result.utterance_sum_sec += u.end_sec - u.start_sec;
  result.lookahead_violations = source.violations();
  return result;
}

RunResult run_offline(const MultiSignal& audio, const SegmentList& segments,
                      const OnlineConfig& wpe_config, const OfflineConfig& config) {
  check_audio(audio);
  wpe_config.validate();
  config.validate();
  const auto& stft = wpe_config.stft;
  if (stft.sample_rate_hz != config.stft.sample_rate_hz ||
      stft.window_len_samples != config.stft.window_len_samples ||
      stft.hop_samples != config.stft.hop_samples)
    throw Error("online and offline STFT settings differ");
  RunResult result;
  const std::size_t samples = audio[0].size();
  result.audio_sec = static_cast<double>(samples) / stft.sample_rate_hz;
  result.speech_sec = clipped_speech(segments, result.audio_sec);
  const auto start = Clock::now();

  const std::size_t frames = frame_count(samples, stft);
  const std::size_t freqs = stft.num_freqs(), m = audio.size();
  const ActivityMatrix activities = segments_to_activities(segments, stft, frames);
  FreqPlanes session(freqs, m, frames);
  WpeState wpe = wpe_init(wpe_config.wpe, freqs, m);
  for (std::size_t first = 0; first < frames; first += wpe_config.block_len_frames) {
    const std::size_t last = std::min(frames, first + wpe_config.block_len_frames);
    const auto [begin, end] = frame_samples(first, last, stft);
    const SpectralBlock clean =
        wpe_process_block(wpe, analyze(slice_samples(audio, begin, end), stft, first), config.threads);
    for (std::size_t t = 0; t < clean.num_frames(); ++t)
      for (std::size_t f = 0; f < freqs; ++f)
        for (std::size_t c = 0; c < m; ++c) session.set(first + t, f, c, clean.frames(t, f, c));
    ++result.blocks;
  }

  for (const auto& run : activity_runs(activities)) {
    const auto enhanced = enhance_utterance(session, activities,
                                            {run.source, run.first_frame, run.last_frame}, config);
    EnhancedUtterance utt;
    utt.speaker = activities.label(run.source);
    utt.source = run.source;
    utt.first_frame = run.first_frame;
    utt.last_frame = run.last_frame;
    utt.spectra = enhanced.spectra;
    utt.reference_channels.assign(enhanced.spectra.rows(), enhanced.reference_channel);
    finish_utterance(utt, stft);
    result.utterances.push_back(std::move(utt));
  }
  sort_utterances(result.utterances);
  result.processing_sec = seconds_since(start);
  for (const auto& u : result.utterances) result.utterance_sum_sec += u.end_sec - u.start_sec;
  return result;
}

Signal reference_projection(const SpectralBlock& signal_stft, const EnhancedUtterance& utt,
                            const StftConfig& stft) {
  const std::size_t rows = utt.last_frame - utt.first_frame + 1;
  if (utt.reference_channels.size() != rows) throw Error("reference channels do not cover the utterance");
  if (utt.last_frame >= signal_stft.start_frame_index + signal_stft.num_frames() ||
      utt.first_frame < signal_stft.start_frame_index)
    throw Error("utterance outside the reference spectra");
  CTensor2 ref(rows, signal_stft.num_freqs());
  for (std::size_t t = 0; t < rows; ++t) {
    const std::size_t src = utt.first_frame + t - signal_stft.start_frame_index;
    const std::size_t ch = std::min(utt.reference_channels[t], signal_stft.num_channels() - 1);
    for (std::size_t f = 0; f < signal_stft.num_freqs(); ++f) ref(t, f) = signal_stft.frames(src, f, ch);
  }
  return synthesize(ref, stft);
}

std::vector<std::optional<UtteranceScore>> score_utterances(
    const RunResult& result, const std::map<std::string, SpectralBlock>& reference_stft,
    const SpectralBlock& mixture_stft, const StftConfig& stft) {
  std::vector<std::optional<UtteranceScore>> out;
  for (const auto& u : result.utterances) {
    const auto it = reference_stft.find(u.speaker);
    if (it == reference_stft.end()) {
      out.emplace_back();
      continue;
    }
    const Signal ref = reference_projection(it->second, u, stft);
    if (std::all_of(ref.begin(), ref.end(), [](double v) { return v == 0.0; })) {
      out.emplace_back();
      continue;
    }
    const Signal mix = reference_projection(mixture_stft, u, stft);
    out.push_back(UtteranceScore{si_sdr(u.audio, ref), si_sdr(mix, ref)});
  }
  return out;
}

RunReport make_report(const RunResult& result, const std::string& mode) {
  RunReport report;
  report.mode = mode;
  report.audio_sec = result.audio_sec;
  report.speech_sec = result.speech_sec;
  report.utterance_sum_sec = result.utterance_sum_sec;
  report.processing_sec = result.processing_sec;
  report.real_time_factor = result.real_time_factor();
  report.lookahead_violations = result.lookahead_violations;
  report.blocks = result.blocks;
  for (const auto& u : result.utterances)
    report.records.push_back({u.speaker, u.start_sec, u.end_sec, "",
                              u.reference_channels.empty() ? 0 : u.reference_channels.back(), {}, {}});
  return report;
}

void RunReport::write(std::ostream& out) const {
  std::ostringstream s;
  s.precision(10);
  s << "mode=" << mode << '\n'
    << "audio_duration_sec=" << audio_sec << '\n'
    << "speech_duration_sec=" << speech_sec << '\n'
    << "utterance_duration_sum_sec=" << utterance_sum_sec << '\n'
    << "processing_sec=" << processing_sec << '\n'
    << "real_time_factor=" << real_time_factor << '\n'
    << "blocks=" << blocks << '\n'
    << "lookahead_violations=" << lookahead_violations << '\n'
    << "utterances=" << records.size() << '\n';
  for (const auto& r : records) {
    s << "utt\tspeaker=" << r.speaker << "\tstart_sec=" << r.start_sec << "\tend_sec=" << r.end_sec
      << "\tpath=" << r.path << "\treference_channel=" << r.reference_channel;
    if (r.si_sdr_db) s << "\tsi_sdr_db=" << *r.si_sdr_db;
    if (r.mixture_si_sdr_db) s << "\tmixture_si_sdr_db=" << *r.mixture_si_sdr_db;
    s << '\n';
  }
  out << s.str();
}

std::string utterance_file_name(const EnhancedUtterance& utt) {
  std::ostringstream name;
  name << utt.speaker << '_' << std::llround(utt.start_sec * 1000.0) << '_'
       << std::llround(utt.end_sec * 1000.0) << ".wav";
  return name.str();
}

}  // namespace bogss
