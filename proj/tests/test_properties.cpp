#include <doctest.h>

#include <numeric>

#include "bogss/beamform.hpp"
#include "bogss/gss_online.hpp"
#include "bogss/stft.hpp"
#include "test_util.hpp"

using namespace bogss;
using namespace bogss::test;

namespace {

constexpr int kCases = 200;

struct Instance {
  FreqPlanes raw;
  ActivityMatrix acts;
  CacgmmState state;
  SourceSet active;
};

Instance random_instance(Rng& rng) {
  const std::size_t freqs = uniform_index(rng, 1, 6), m = uniform_index(rng, 2, 6);
  const std::size_t frames = uniform_index(rng, 1, 40), k = uniform_index(rng, 1, 5);
  Instance in{random_planes(rng, freqs, m, frames), random_activities(rng, frames, k, uniform(rng, 0.1, 0.9)),
              random_state(rng, freqs, m, k), {}};
  in.active = active_sources(in.acts);
  return in;
}

bool hermitian_psd(std::span<const cplx> b, std::size_t m) {
  std::vector<cplx> v(b.begin(), b.end());
  double tr = 0.0;
  for (std::size_t i = 0; i < m; ++i) tr += v[i * m + i].real();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (std::abs(v[i * m + j] - std::conj(v[j * m + i])) > 1e-8 * (1.0 + tr)) return false;
  const Eigen::SelfAdjointEigenSolver<EMat> eig(to_eigen(v, m));
  return eig.eigenvalues().minCoeff() >= -1e-10 * (1.0 + tr);
}

PosteriorBlock e_step(const Instance& in, const FreqPlanes& raw) {
  return e_step_guided(normalize_features(raw), in.acts, in.state, in.active);
}

double max_diff(const PosteriorBlock& a, const PosteriorBlock& b) {
  double e = 0.0;
  for (std::size_t t = 0; t < a.num_frames(); ++t)
    for (std::size_t f = 0; f < a.num_freqs(); ++f)
      for (std::size_t k = 0; k < a.num_sources(); ++k) e = std::max(e, std::abs(a(t, f, k) - b(t, f, k)));
  return e;
}

}  // namespace

TEST_CASE("posteriors are normalized and supported on active sources") {
  Rng rng(200);
  for (int c = 0; c < kCases; ++c) {
    const auto in = random_instance(rng);
    const auto g = e_step(in, in.raw);
    for (std::size_t t = 0; t < g.num_frames(); ++t)
      for (std::size_t f = 0; f < g.num_freqs(); ++f) {
        double sum = 0.0;
        for (std::size_t k = 0; k < g.num_sources(); ++k) {
          const double v = g(t, f, k);
          REQUIRE(v >= 0.0);
          REQUIRE(v <= 1.0 + 1e-12);
          if (!in.acts(t, k)) REQUIRE(v == 0.0);
          sum += v;
        }
        REQUIRE(std::abs(sum - 1.0) < 1e-12);
      }
  }
}

TEST_CASE("shape matrices stay Hermitian positive semidefinite") {
  Rng rng(201);
  for (int c = 0; c < kCases; ++c) {
    auto in = random_instance(rng);
    const auto unit = normalize_features(in.raw);
    const auto g = e_step_guided(unit, in.acts, in.state, in.active);
    const auto weighting = c % 2 ? ShapeWeighting::weighted : ShapeWeighting::unweighted;
    const std::size_t k = in.active[uniform_index(rng, 0, in.active.size() - 1)];
    const auto est = compute_block_shape(unit, g, in.state, k, weighting);
    std::vector<double> mass(in.raw.freqs());
    for (std::size_t f = 0; f < mass.size(); ++f) mass[f] = est.mass[f];
    if (c % 3 == 0) update_shape_decay(in.state, k, mass, est, 0.9);
    else if (c % 3 == 1) update_shape_accumulation(in.state, k, mass, est);
    else m_step_shape(unit, g, in.state, in.active, weighting);
    const std::size_t m = in.raw.channels();
    for (std::size_t f = 0; f < in.raw.freqs(); ++f) {
      REQUIRE(hermitian_psd(est.at(f, m), m));
      for (std::size_t s = 0; s < in.state.num_sources(); ++s) REQUIRE(hermitian_psd(in.state.shape(f, s), m));
    }
  }
}

TEST_CASE("speech and noise covariances sum to the sample covariance") {
  Rng rng(202);
  for (int c = 0; c < kCases;) {
    const auto in = random_instance(rng);
    if (in.state.num_sources() < 2) continue;
    ++c;
    const auto g = e_step(in, in.raw);
    const std::size_t target = uniform_index(rng, 1, in.state.num_sources() - 1);
    const auto cov = spatial_covariances(in.raw, g, target);
    const std::size_t m = in.raw.channels(), frames = in.raw.frames();
    for (std::size_t f = 0; f < in.raw.freqs(); ++f) {
      REQUIRE(hermitian_psd(cov.speech_at(f), m));
      REQUIRE(hermitian_psd(cov.noise_at(f), m));
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          cplx want = 0.0;
          for (std::size_t t = 0; t < frames; ++t) want += in.raw.at(t, f, i) * std::conj(in.raw.at(t, f, j));
          want /= static_cast<double>(frames);
          REQUIRE(std::abs(cov.speech_at(f)[i * m + j] + cov.noise_at(f)[i * m + j] - want) < 1e-10);
        }
    }
  }
}

TEST_CASE("MVDR weights ignore the speech covariance scale") {
  Rng rng(203);
  for (int c = 0; c < kCases; ++c) {
    const std::size_t m = uniform_index(rng, 1, 6), freqs = uniform_index(rng, 1, 4);
    SpatialCovariances cov{freqs, m, {}, {}};
    for (std::size_t f = 0; f < freqs; ++f) {
      const auto s = random_hpd(rng, m, uniform_index(rng, 0, 3)), n = random_hpd(rng, m);
      cov.speech.insert(cov.speech.end(), s.begin(), s.end());
      cov.noise.insert(cov.noise.end(), n.begin(), n.end());
    }
    auto scaled = cov;
    const double k = std::exp(uniform(rng, -8, 8));
    for (auto& v : scaled.speech) v *= k;
    const std::size_t ref = uniform_index(rng, 0, m - 1);
    const auto a = mvdr_weights(cov, ref), b = mvdr_weights(scaled, ref);
    for (std::size_t f = 0; f < freqs; ++f) {
      double norm = 0.0;
      for (auto v : a.at(f)) norm = std::max(norm, std::abs(v));
      for (std::size_t i = 0; i < m; ++i) REQUIRE(std::abs(a.at(f)[i] - b.at(f)[i]) <= 1e-10 * norm);
    }
  }
}

TEST_CASE("STFT round trip reconstructs the interior") {
  Rng rng(204);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int c = 0; c < kCases; ++c) {
    StftConfig cfg;
    cfg.window_len_samples = std::size_t{1} << uniform_index(rng, 4, 10);
    cfg.hop_samples = cfg.window_len_samples / (std::size_t{1} << uniform_index(rng, 2, 3));
    const std::size_t len = cfg.window_len_samples * uniform_index(rng, 3, 8) + uniform_index(rng, 0, 100);
    Signal x(len);
    for (auto& v : x) v = g(rng);
    const auto b = analyze({x}, cfg);
    CTensor2 spec(b.num_frames(), b.num_freqs());
    for (std::size_t t = 0; t < b.num_frames(); ++t)
      for (std::size_t f = 0; f < b.num_freqs(); ++f) spec(t, f) = b.frames(t, f, 0);
    const auto y = synthesize(spec, cfg);
    for (std::size_t i = cfg.window_len_samples; i + cfg.window_len_samples < y.size(); ++i)
      REQUIRE(std::abs(y[i] - x[i]) < 1e-9);
  }
}

TEST_CASE("online context queue never exceeds its capacity") {
  Rng rng(205);
  for (int c = 0; c < kCases; ++c) {
    OnlineConfig cfg;
    cfg.stft.window_len_samples = 8;
    cfg.stft.hop_samples = 2;
    cfg.block_len_frames = uniform_index(rng, 1, 12);
    cfg.context_len_frames = uniform_index(rng, 0, 15);
    cfg.strategy = c % 2 ? Strategy::accumulation : Strategy::decay;
    cfg.wpe.taps = uniform_index(rng, 0, 2);
    const std::size_t m = uniform_index(rng, 2, 3), k = uniform_index(rng, 1, 3);
    const std::size_t frames = uniform_index(rng, 1, 50);
    const auto raw = random_planes(rng, cfg.stft.num_freqs(), m, frames);
    auto acts = random_activities(rng, frames, k, uniform(rng, 0.0, 0.6));
    for (std::size_t s = 1; s < k; ++s) acts.set_label(s, "s" + std::to_string(s));
    OnlineEngine engine(cfg, m);
    for (std::size_t b = 0; b < frames; b += cfg.block_len_frames) {
      const std::size_t e = std::min(frames, b + cfg.block_len_frames);
      SpectralBlock block;
      block.start_frame_index = b;
      block.frames = CTensor3(e - b, raw.freqs(), m);
      for (std::size_t t = b; t < e; ++t)
        for (std::size_t f = 0; f < raw.freqs(); ++f)
          for (std::size_t ch = 0; ch < m; ++ch) block.frames(t - b, f, ch) = raw.at(t, f, ch);
      engine.process_block(block, acts.slice(b, e));
      REQUIRE(engine.queue().size() <= cfg.context_len_frames);
      REQUIRE(engine.queue().size() == std::min(e, cfg.context_len_frames));
    }
  }
}

TEST_CASE("E-step is invariant to feature and shape scaling") {
  Rng rng(206);
  for (int c = 0; c < kCases; ++c) {
    auto in = random_instance(rng);
    const auto base = e_step(in, in.raw);
    auto scaled = in.raw;
    for (std::size_t t = 0; t < scaled.frames(); ++t) {
      const cplx s = std::polar(std::exp(uniform(rng, -4, 4)), uniform(rng, 0, 6.3));
      for (std::size_t f = 0; f < scaled.freqs(); ++f)
        for (std::size_t m = 0; m < scaled.channels(); ++m) scaled.set(t, f, m, s * in.raw.at(t, f, m));
    }
    REQUIRE(max_diff(base, e_step(in, scaled)) < 1e-9);
    for (std::size_t f = 0; f < in.state.num_freqs(); ++f)
      for (std::size_t k = 0; k < in.state.num_sources(); ++k) {
        const double s = std::exp(uniform(rng, -3, 3));
        for (auto& v : in.state.shape(f, k)) v *= s;
      }
    REQUIRE(max_diff(base, e_step(in, in.raw)) < 1e-9);
  }
}

TEST_CASE("E-step is equivariant under speaker relabelling") {
  Rng rng(207);
  for (int c = 0; c < kCases; ++c) {
    const auto in = random_instance(rng);
    const std::size_t k = in.state.num_sources();
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin() + 1, perm.end(), rng);
    Instance p{in.raw, ActivityMatrix(in.acts.num_frames(), k), in.state, {}};
    for (std::size_t t = 0; t < in.acts.num_frames(); ++t)
      for (std::size_t s = 1; s < k; ++s) p.acts.set(t, perm[s], in.acts(t, s));
    for (std::size_t f = 0; f < in.state.num_freqs(); ++f)
      for (std::size_t s = 0; s < k; ++s) {
        p.state.alpha(f, perm[s]) = in.state.alpha(f, s);
        const auto src = in.state.shape(f, s);
        std::copy(src.begin(), src.end(), p.state.shape(f, perm[s]).begin());
      }
    p.active = active_sources(p.acts);
    const auto a = e_step(in, in.raw), b = e_step(p, p.raw);
    for (std::size_t t = 0; t < a.num_frames(); ++t)
      for (std::size_t f = 0; f < a.num_freqs(); ++f)
        for (std::size_t s = 0; s < k; ++s) REQUIRE(std::abs(a(t, f, s) - b(t, f, perm[s])) < 1e-12);
  }
}
