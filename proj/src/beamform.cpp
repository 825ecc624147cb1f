#include "bogss/beamform.hpp"

#include <cmath>

#include "bogss/kernels.hpp"
#include "bogss/linalg.hpp"
#include "bogss/parallel.hpp"

namespace bogss {
namespace {

constexpr double kTraceFloor = 1e-12;

/// Columns of R_noise^-1 R_speech and its trace, per bin.
struct NoiseWhitened {
  linalg::CMatrix product;
  cplx trace;
  bool ok;
};

NoiseWhitened whiten(const SpatialCovariances& cov, std::size_t f, double eps) {
  const std::size_t m = cov.channels;
  const auto reg = linalg::regularized(cov.noise_at(f), m, eps);
  linalg::CMatrix l(m * m);
  NoiseWhitened out{linalg::CMatrix(m * m), 0.0, false};
  if (!linalg::cholesky(reg, m, l)) return out;
  const auto speech = cov.speech_at(f);
  linalg::solve_cholesky(l, m, speech, m, out.product);
  out.trace = linalg::trace(out.product, m);
  out.ok = std::isfinite(out.trace.real()) && std::isfinite(out.trace.imag()) &&
           std::abs(out.trace) >= kTraceFloor;
  return out;
}

double hermitian_form(std::span<const cplx> r, std::size_t m, std::span<const cplx> w) {
  return linalg::quadratic_form(r, m, w);
}

}  // namespace

SpatialCovariances spatial_covariances(const FreqPlanes& raw, const PosteriorBlock& gammas,
                                       std::size_t target, std::size_t threads) {
  if (target == kNoiseSource) throw Error("beamformer target must be a speaker, not noise");
  if (target >= gammas.num_sources()) throw Error("beamformer target out of range");
  if (raw.frames() != gammas.num_frames() || raw.freqs() != gammas.num_freqs())
    throw Error("covariances: features and posteriors disagree in shape");
  const std::size_t frames = raw.frames(), m = raw.channels();
  if (frames == 0) throw Error("covariances need at least one frame");
  SpatialCovariances cov{raw.freqs(), m, std::vector<cplx>(raw.freqs() * m * m),
                         std::vector<cplx>(raw.freqs() * m * m)};
  const auto& kern = kernels::active();
  const double inv_t = 1.0 / static_cast<double>(frames);
  parallel_for(raw.freqs(), threads, [&](std::size_t f) {
    const double* gamma = gammas.row(f, target);
    std::vector<double> ws(frames), wn(frames);
    for (std::size_t t = 0; t < frames; ++t) {
      ws[t] = gamma[t] * inv_t;
      wn[t] = (1.0 - gamma[t]) * inv_t;
    }
    const kernels::ChannelPlanes x{raw.re(f), raw.im(f), m, frames, frames};
    kern.weighted_outer(ws.data(), x, cov.speech_at(f).data());
    kern.weighted_outer(wn.data(), x, cov.noise_at(f).data());
  });
  return cov;
}

BeamformerWeights mvdr_weights(const SpatialCovariances& cov, std::size_t reference,
                               const BeamformerOptions& options) {
  const std::size_t m = cov.channels;
  if (reference >= m) throw Error("reference channel out of range");
  BeamformerWeights out{cov.freqs, m, std::vector<cplx>(cov.freqs * m), reference, 0};
  for (std::size_t f = 0; f < cov.freqs; ++f) {
    const auto wh = whiten(cov, f, options.noise_regularization);
    auto w = out.at(f);
    if (!wh.ok) {
      ++out.zeroed_bins;
      continue;
    }
    for (std::size_t i = 0; i < m; ++i) w[i] = wh.product[i * m + reference] / wh.trace;
  }
  return out;
}

void blind_analytic_normalization(BeamformerWeights& weights, const SpatialCovariances& cov) {
  const std::size_t m = cov.channels;
  std::vector<cplx> rw(m);
  for (std::size_t f = 0; f < weights.freqs; ++f) {
    auto w = weights.at(f);
    const auto noise = cov.noise_at(f);
    linalg::matvec(noise, m, w, rw);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      num += std::norm(rw[i]);
      den += (std::conj(w[i]) * rw[i]).real();
    }
    if (!(den > 0.0) || !std::isfinite(num) || !std::isfinite(den)) continue;
    const double gain = std::sqrt(num / static_cast<double>(m)) / den;
    for (auto& v : w) v *= gain;
  }
}

ReferenceChoice select_reference(const SpatialCovariances& cov, const BeamformerOptions& options) {
  const std::size_t m = cov.channels;
  ReferenceChoice choice;
  choice.scores.assign(m, 0.0);
  std::vector<double> speech(m, 0.0), noise(m, 0.0);
  std::vector<cplx> w(m);
  for (std::size_t f = 0; f < cov.freqs; ++f) {
    const auto wh = whiten(cov, f, options.noise_regularization);
    if (!wh.ok) continue;
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t i = 0; i < m; ++i) w[i] = wh.product[i * m + r] / wh.trace;
      speech[r] += hermitian_form(cov.speech_at(f), m, w);
      noise[r] += hermitian_form(cov.noise_at(f), m, w);
    }
  }
  bool found = false;
  double best = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    const double score = speech[r] / noise[r];
    choice.scores[r] = score;
    if (!std::isfinite(score)) continue;
    if (!found || score > best) {
      found = true;
      best = score;
      choice.channel = r;
    }
  }
  if (!found) {
    choice.channel = 0;
    choice.fallback = true;
  }
  return choice;
}

BeamformerWeights design_beamformer(const SpatialCovariances& cov, const BeamformerOptions& options) {
  const std::size_t reference =
      options.fixed_reference ? *options.fixed_reference : select_reference(cov, options).channel;
  auto weights = mvdr_weights(cov, reference, options);
  blind_analytic_normalization(weights, cov);
  return weights;
}

CTensor2 apply_beamformer(const BeamformerWeights& weights, const FreqPlanes& raw,
                          std::size_t first, std::size_t count) {
  if (weights.freqs != raw.freqs() || weights.channels != raw.channels())
    throw Error("beamformer and features disagree in shape");
  if (first + count > raw.frames()) throw Error("beamformer frame range out of bounds");
  CTensor2 out(count, raw.freqs());
  const auto& kern = kernels::active();
  std::vector<double> zr(count), zi(count);
  for (std::size_t f = 0; f < raw.freqs(); ++f) {
    const kernels::ChannelPlanes x{raw.re(f) + first, raw.im(f) + first, raw.channels(),
                                   raw.frames(), count};
    kern.beamform(weights.at(f).data(), x, zr.data(), zi.data());
    for (std::size_t t = 0; t < count; ++t) out(t, f) = {zr[t], zi[t]};
  }
  return out;
}

}  // namespace bogss
