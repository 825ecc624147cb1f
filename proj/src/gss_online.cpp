#include "bogss/gss_online.hpp"

#include <algorithm>
#include <map>

namespace bogss {

void OnlineConfig::validate() const {
  if (block_len_frames < 1) throw Error("block length must be at least one frame");
  if (!(eta >= 0.0 && eta < 1.0)) throw Error("decay factor must lie in [0, 1)");
  if (!(min_new_source_sec >= 0.0)) throw Error("minimum new-source duration must be nonnegative");
  if (threads < 1) throw Error("thread count must be at least 1");
  stft.validate();
  wpe.validate();
}

void ContextQueue::push(Frame frame) {
  if (capacity_ == 0) return;
  frames_.push_back(std::move(frame));
  while (frames_.size() > capacity_) frames_.pop_front();
}

SourceRegistry::SourceRegistry() : records_(1) { records_[0].label = "noise"; }

std::size_t SourceRegistry::count() const {
  return 1 + static_cast<std::size_t>(std::count_if(records_.begin() + 1, records_.end(),
                                                      [](const SourceRecord& r) { return r.admitted; }));
}

void SourceRegistry::widen(const ActivityMatrix& activities) {
  if (activities.num_sources() < records_.size())
    throw Error("activity matrix lost sources: had " + std::to_string(records_.size()) + ", got " +
                std::to_string(activities.num_sources()));
  records_.resize(activities.num_sources());
  for (std::size_t k = 1; k < records_.size(); ++k) {
    if (records_[k].label.empty()) records_[k].label = activities.label(k);
    else if (records_[k].label != activities.label(k))
      throw Error("activity column " + std::to_string(k) + " changed label from " +
                  records_[k].label + " to " + activities.label(k));
  }
}

TrackerUpdate UtteranceTracker::update(const ActivityMatrix& acts, std::size_t block_start) {
  TrackerUpdate out;
  const std::size_t frames = acts.num_frames();
  if (open_.size() < acts.num_sources()) open_.resize(acts.num_sources());
  for (std::size_t k = 1; k < acts.num_sources(); ++k) {
    if (open_[k] && (frames == 0 || !acts(0, k))) {
      out.closed.push_back({k, *open_[k]});
      open_[k].reset();
    }
    std::size_t t = 0;
    while (t < frames) {
      if (!acts(t, k)) {
        ++t;
        continue;
      }
      const std::size_t first = t;
      while (t < frames && acts(t, k)) ++t;
      const std::size_t start = (first == 0 && open_[k]) ? *open_[k] : block_start + first;
      const bool finalized = t < frames;
      out.spans.push_back({{k, start}, block_start + first, block_start + t - 1, finalized});
      if (finalized) open_[k].reset();
      else open_[k] = start;
    }
  }
  std::stable_sort(out.spans.begin(), out.spans.end(), [](const auto& a, const auto& b) {
    return a.first_frame != b.first_frame ? a.first_frame < b.first_frame : a.id.source < b.id.source;
  });
  return out;
}

std::vector<UtteranceId> UtteranceTracker::finish() {
  std::vector<UtteranceId> out;
  for (std::size_t k = 0; k < open_.size(); ++k)
    if (open_[k]) out.push_back({k, *open_[k]});
  open_.clear();
  return out;
}

SourceSet active_set(const ActivityMatrix& activities) { return active_sources(activities); }

OnlineEngine::OnlineEngine(const OnlineConfig& config, std::size_t num_channels)
    : config_(config),
      channels_(num_channels),
      wpe_(wpe_init(config.wpe, config.stft.num_freqs(), num_channels)),
      state_(config.stft.num_freqs(), num_channels, 1),
      queue_(config.context_len_frames) {
  config_.validate();
  if (num_channels < 1) throw Error("need at least one channel");
}

void OnlineEngine::rotate_queue(const FreqPlanes& raw, const ActivityMatrix& acts,
                                const PosteriorBlock& gammas, std::size_t context_len,
                                std::size_t block_start) {
  const std::size_t freqs = raw.freqs(), m = raw.channels(), k = acts.num_sources();
  for (std::size_t i = 0; i < context_len; ++i) {
    auto& frame = queue_[i];
    frame.activity.resize(k, 0);
    frame.posteriors.assign(freqs * k, 0.0);
    for (std::size_t f = 0; f < freqs; ++f)
      for (std::size_t s = 0; s < k; ++s) frame.posteriors[f * k + s] = gammas(i, f, s);
  }
  for (std::size_t t = context_len; t < raw.frames(); ++t) {
    ContextQueue::Frame frame;
    frame.global_index = block_start + (t - context_len);
    frame.features.resize(freqs * m);
    for (std::size_t f = 0; f < freqs; ++f)
      for (std::size_t c = 0; c < m; ++c) frame.features[f * m + c] = raw.at(t, f, c);
    frame.activity.resize(k);
    for (std::size_t s = 0; s < k; ++s) frame.activity[s] = acts(t, s) ? 1 : 0;
    frame.posteriors.resize(freqs * k);
    for (std::size_t f = 0; f < freqs; ++f)
      for (std::size_t s = 0; s < k; ++s) frame.posteriors[f * k + s] = gammas(t, f, s);
    queue_.push(std::move(frame));
  }
}

BlockOutput OnlineEngine::process_block(const SpectralBlock& block, const ActivityMatrix& block_acts) {
  const std::size_t freqs = config_.stft.num_freqs(), m = channels_;
  const std::size_t len = block.num_frames();
  if (len == 0) throw Error("empty block");
  if (len > config_.block_len_frames)
    throw Error("block of " + std::to_string(len) + " frames exceeds the block length " +
                std::to_string(config_.block_len_frames));
  if (block.num_freqs() != freqs || block.num_channels() != m)
    throw Error("block shape does not match the engine");
  if (block_acts.num_frames() != len) throw Error("block activities do not match the block length");
  if (block.start_frame_index != next_frame_)
    throw Error("blocks must arrive in order: expected frame " + std::to_string(next_frame_) +
                ", got " + std::to_string(block.start_frame_index));
  registry_.widen(block_acts);
  const std::size_t width = block_acts.num_sources();
  state_.add_sources(width);
  const std::size_t block_start = next_frame_;
  const std::size_t block_index = blocks_;
  next_frame_ += len;
  ++blocks_;

  const SpectralBlock clean = wpe_process_block(wpe_, block, config_.threads);

  BlockOutput out;
  auto tracked = tracker_.update(block_acts, block_start);
  out.closed = std::move(tracked.closed);

  // Block plus context: features, activities, posteriors.
  const std::size_t ctx = queue_.size();
  const std::size_t total = ctx + len;
  FreqPlanes raw(freqs, m, total);
  ActivityMatrix acts(total, width);
  for (std::size_t k = 1; k < width; ++k) acts.set_label(k, block_acts.label(k));
  for (std::size_t i = 0; i < ctx; ++i) {
    const auto& frame = queue_[i];
    for (std::size_t f = 0; f < freqs; ++f)
      for (std::size_t c = 0; c < m; ++c) raw.set(i, f, c, frame.features[f * m + c]);
    for (std::size_t k = 1; k < frame.activity.size(); ++k) acts.set(i, k, frame.activity[k] != 0);
  }
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t f = 0; f < freqs; ++f)
      for (std::size_t c = 0; c < m; ++c) raw.set(ctx + t, f, c, clean.frames(t, f, c));
    for (std::size_t k = 1; k < width; ++k) acts.set(ctx + t, k, block_acts(t, k));
  }

  // Initial posteriors: stored ones for the context, activity-only for the block.
  PosteriorBlock gammas = init_posteriors_from_activities(acts, freqs);
  for (std::size_t i = 0; i < ctx; ++i) {
    const auto& frame = queue_[i];
    const std::size_t stored = frame.activity.size();
    for (std::size_t f = 0; f < freqs; ++f)
      for (std::size_t k = 0; k < width; ++k)
        gammas(i, f, k) = k < stored ? frame.posteriors[f * stored + k] : 0.0;
  }

  bool speaker_in_block = false;
  for (std::size_t t = 0; t < len && !speaker_in_block; ++t)
    for (std::size_t k = 1; k < width; ++k)
      if (block_acts(t, k)) {
        speaker_in_block = true;
        break;
      }
  if (!speaker_in_block) {
    out.silent = true;
    rotate_queue(raw, acts, gammas, ctx, block_start);
    return out;
  }

  const SourceSet active = active_set(acts);
  const FreqPlanes unit = normalize_features(raw, config_.threads);

  // Admission of new sources and re-admission under the minimum-duration rule.
  std::vector<bool> fresh(width, false);
  for (std::size_t k : active) {
    auto& rec = registry_[k];
    const std::size_t block_frames = block_acts.active_frames(k);
    const bool readmit = rec.admitted && rec.pending_readmission && block_frames > 0;
    if (rec.admitted && !readmit) continue;
    fresh[k] = true;
    const bool keep_context = k == kNoiseSource && !rec.admitted;
    if (!keep_context)
      for (std::size_t f = 0; f < freqs; ++f) std::fill_n(gammas.row(f, k), ctx, 0.0);
    for (std::size_t f = 0; f < freqs; ++f) {
      state_.accum(f, k) = 0.0;
      auto b = state_.shape(f, k);
      std::fill(b.begin(), b.end(), cplx{});
    }
    rec.admitted = true;
    if (!rec.first_seen_block) rec.first_seen_block = block_index;
    rec.active_sec_at_admission = static_cast<double>(block_frames) *
                                  static_cast<double>(config_.stft.hop_samples) /
                                  config_.stft.sample_rate_hz;
    rec.pending_readmission = k != kNoiseSource && rec.active_sec_at_admission < config_.min_new_source_sec;
  }

  m_step_alpha(gammas, active, state_);

  std::vector<double> block_mass(freqs);
  for (std::size_t k : active) {
    const auto estimate = compute_block_shape(
        unit, gammas, state_, k, fresh[k] ? ShapeWeighting::unweighted : ShapeWeighting::weighted,
        config_.cacgmm, config_.threads);
    for (std::size_t f = 0; f < freqs; ++f) {
      const double* row = gammas.row(f, k);
      double s = 0.0;
      for (std::size_t t = ctx; t < total; ++t) s += row[t];
      block_mass[f] = s;
    }
    if (config_.strategy == Strategy::accumulation)
      update_shape_accumulation(state_, k, block_mass, estimate, config_.cacgmm);
    else
      update_shape_decay(state_, k, block_mass, estimate, config_.eta, config_.cacgmm);
  }

  gammas = e_step_guided(unit, acts, state_, active, config_.cacgmm, config_.threads);

  // One beamformer per speaker and block, shared by all of its utterances.
  std::map<std::size_t, BeamformerWeights> beamformers;
  for (const auto& span : tracked.spans) {
    const std::size_t k = span.id.source;
    auto it = beamformers.find(k);
    if (it == beamformers.end()) {
      const auto cov = spatial_covariances(raw, gammas, k, config_.threads);
      it = beamformers.emplace(k, design_beamformer(cov, config_.beamformer)).first;
    }
    UtteranceSegment seg;
    seg.speaker = registry_[k].label;
    seg.id = span.id;
    seg.start_frame = span.first_frame;
    seg.end_frame = span.last_frame;
    seg.finalized = span.finalized;
    seg.reference_channel = it->second.reference;
    seg.spectra = apply_beamformer(it->second, raw, ctx + (span.first_frame - block_start),
                                   span.last_frame - span.first_frame + 1);
    out.segments.push_back(std::move(seg));
  }

  last_posteriors_ = gammas;
  last_offset_ = block_start - ctx;
  rotate_queue(raw, acts, gammas, ctx, block_start);
  return out;
}

std::vector<UtteranceId> OnlineEngine::finish() { return tracker_.finish(); }

}  // namespace bogss
