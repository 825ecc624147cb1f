#include "bogss/gss_offline.hpp"

#include <algorithm>
#include <cmath>

namespace bogss {

void OfflineConfig::validate() const {
  if (em_iterations < 1) throw Error("offline EM needs at least one iteration");
  if (!(context_sec >= 0.0)) throw Error("offline context must be nonnegative");
  if (threads < 1) throw Error("thread count must be at least 1");
  stft.validate();
}

std::size_t OfflineConfig::context_frames() const {
  return static_cast<std::size_t>(
      std::llround(context_sec * stft.sample_rate_hz / static_cast<double>(stft.hop_samples)));
}

FreqPlanes slice_frames(const FreqPlanes& planes, std::size_t begin, std::size_t end) {
  if (begin > end || end > planes.frames()) throw Error("frame slice out of range");
  FreqPlanes out(planes.freqs(), planes.channels(), end - begin);
  for (std::size_t f = 0; f < planes.freqs(); ++f)
    for (std::size_t m = 0; m < planes.channels(); ++m) {
      std::copy(planes.re(f, m) + begin, planes.re(f, m) + end, out.re(f, m));
      std::copy(planes.im(f, m) + begin, planes.im(f, m) + end, out.im(f, m));
    }
  return out;
}

OfflineResult enhance_utterance(const FreqPlanes& session, const ActivityMatrix& activities,
                                const OfflineUtterance& utt, const OfflineConfig& config) {
  config.validate();
  if (utt.last_frame < utt.first_frame) throw Error("empty utterance");
  if (utt.last_frame >= session.frames() || activities.num_frames() != session.frames())
    throw Error("utterance outside the session");
  if (utt.source == kNoiseSource || utt.source >= activities.num_sources())
    throw Error("utterance source must be a speaker");
  const std::size_t ctx = config.context_frames();
  OfflineResult out;
  out.window_begin = utt.first_frame > ctx ? utt.first_frame - ctx : 0;
  out.window_end = std::min(session.frames(), utt.last_frame + 1 + ctx);

  const FreqPlanes raw = slice_frames(session, out.window_begin, out.window_end);
  const ActivityMatrix acts = activities.slice(out.window_begin, out.window_end);
  const FreqPlanes unit = normalize_features(raw, config.threads);
  const auto em = offline_em(unit, acts, config.em_iterations, config.cacgmm, config.threads);
  const auto cov = spatial_covariances(raw, em.gammas, utt.source, config.threads);
  const auto weights = design_beamformer(cov, config.beamformer);
  out.reference_channel = weights.reference;
  out.spectra = apply_beamformer(weights, raw, utt.first_frame - out.window_begin,
                                 utt.last_frame - utt.first_frame + 1);
  return out;
}

}  // namespace bogss
