#include <doctest.h>

#include <limits>

#include "bogss/eval.hpp"
#include "bogss/gss_offline.hpp"
#include "bogss/gss_online.hpp"
#include "bogss/pipeline.hpp"
#include "test_util.hpp"

using namespace bogss;
using namespace bogss::test;

namespace {

OfflineConfig small_config(double context_frames, std::size_t iterations) {
  OfflineConfig c;
  c.stft.window_len_samples = 16;
  c.stft.hop_samples = 4;
  c.context_sec = context_frames * 4.0 / 16000.0;
  c.em_iterations = iterations;
  return c;
}

}  // namespace

TEST_CASE("context length in frames") {
  OfflineConfig c;
  CHECK(c.context_frames() == 625);
  c.context_sec = 0.0;
  CHECK(c.context_frames() == 0);
  c.em_iterations = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("frames outside the utterance window are never read") {
  Rng rng(70);
  const auto cfg = small_config(10, 3);
  const std::size_t freqs = cfg.stft.num_freqs();
  const auto mix = two_source_mixture(rng, freqs, 3, 120, 0.1);
  const OfflineUtterance utt{2, 60, 80};
  const auto clean = enhance_utterance(mix.raw, mix.activities, utt, cfg);
  CHECK(clean.window_begin == 50);
  CHECK(clean.window_end == 91);
  CHECK(clean.spectra.rows() == 21);
  auto poisoned = mix.raw;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t t = 0; t < 120; ++t)
    if (t < 50 || t >= 91)
      for (std::size_t f = 0; f < freqs; ++f)
        for (std::size_t m = 0; m < 3; ++m) poisoned.set(t, f, m, {nan, nan});
  const auto again = enhance_utterance(poisoned, mix.activities, utt, cfg);
  CHECK(again.spectra == clean.spectra);
  CHECK(again.reference_channel == clean.reference_channel);

  const auto edge = enhance_utterance(mix.raw, mix.activities, {1, 0, 5}, cfg);
  CHECK(edge.window_begin == 0);
  CHECK(edge.window_end == 16);
}

TEST_CASE("one iteration without context equals a single online block") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(71 + seed);
    const auto cfg = small_config(0, 1);
    const std::size_t freqs = cfg.stft.num_freqs();
    const auto mix = two_source_mixture(rng, freqs, 3, 60, 0.1);
    const auto off = enhance_utterance(mix.raw, mix.activities, {1, 0, 35}, cfg);

    OnlineConfig on;
    on.stft = cfg.stft;
    on.wpe.taps = 0;
    on.block_len_frames = 36;
    on.context_len_frames = 0;
    OnlineEngine engine(on, 3);
    SpectralBlock block;
    block.frames = CTensor3(36, freqs, 3);
    for (std::size_t t = 0; t < 36; ++t)
      for (std::size_t f = 0; f < freqs; ++f)
        for (std::size_t m = 0; m < 3; ++m) block.frames(t, f, m) = mix.raw.at(t, f, m);
    auto acts = mix.activities.slice(0, 36);
    acts.set_label(1, "a");
    acts.set_label(2, "b");
    const auto out = engine.process_block(block, acts);
    REQUIRE(out.segments.size() == 2);
    const auto& seg = out.segments[0];
    REQUIRE(seg.id.source == 1);
    CHECK(seg.reference_channel == off.reference_channel);
    double err = 0.0, scale = 0.0;
    for (std::size_t t = 0; t < 36; ++t)
      for (std::size_t f = 0; f < freqs; ++f) {
        err = std::max(err, std::abs(seg.spectra(t, f) - off.spectra(t, f)));
        scale = std::max(scale, std::abs(off.spectra(t, f)));
      }
    CHECK(err <= 1e-9 * scale);
  }
}

TEST_CASE("EM log-likelihood does not decrease over iterations") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(80 + seed);
    const auto mix = two_source_mixture(rng, 12, 4, 200, 0.3);
    CacgmmOptions opts;
    opts.normalize_shapes = false;
    const auto em = offline_em(normalize_features(mix.raw), mix.activities, 20, opts, 1, true);
    REQUIRE(em.log_likelihood.size() == 20);
    for (std::size_t i = 1; i < 20; ++i)
      CHECK(em.log_likelihood[i] >= em.log_likelihood[i - 1] - 1e-9 * std::abs(em.log_likelihood[i - 1]));
  }
}

TEST_CASE("every utterance of a short scene improves over the mixture") {
  SceneSpec spec;
  spec.seed = 7;
  spec.duration_sec = 16.0;
  spec.overlap_ratio = 0.3;
  const auto scene = generate_scene(spec);
  OnlineConfig front;
  front.wpe.taps = 0;
  OfflineConfig cfg;
  cfg.threads = 4;
  const auto result = run_offline(scene.mixture, scene.segments, front, cfg);
  REQUIRE_FALSE(result.utterances.empty());
  std::map<std::string, SpectralBlock> refs;
  for (std::size_t s = 0; s < scene.labels.size(); ++s)
    refs[scene.labels[s]] = analyze(scene.images[s], front.stft);
  const auto scores = score_utterances(result, refs, analyze(scene.mixture, front.stft), front.stft);
  REQUIRE(scores.size() == result.utterances.size());
  for (const auto& s : scores) {
    REQUIRE(s.has_value());
    CHECK(s->enhanced_db > s->mixture_db);
  }
}

TEST_CASE("invalid utterances are rejected") {
  Rng rng(90);
  const auto cfg = small_config(5, 2);
  const auto mix = two_source_mixture(rng, cfg.stft.num_freqs(), 2, 40, 0.1);
  CHECK_THROWS_AS(enhance_utterance(mix.raw, mix.activities, {1, 10, 9}, cfg), Error);
  CHECK_THROWS_AS(enhance_utterance(mix.raw, mix.activities, {0, 1, 9}, cfg), Error);
  CHECK_THROWS_AS(enhance_utterance(mix.raw, mix.activities, {3, 1, 9}, cfg), Error);
  CHECK_THROWS_AS(enhance_utterance(mix.raw, mix.activities, {1, 30, 40}, cfg), Error);
}
