#include "bogss/cacgmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "bogss/kernels.hpp"
#include "bogss/linalg.hpp"
#include "bogss/parallel.hpp"

namespace bogss {
namespace {

kernels::ChannelPlanes planes_at(const FreqPlanes& p, std::size_t f) {
  return {p.re(f), p.im(f), p.channels(), p.frames(), p.frames()};
}

void check_shapes(const FreqPlanes& unit, const PosteriorBlock& gammas) {
  if (unit.frames() != gammas.num_frames() || unit.freqs() != gammas.num_freqs())
    throw Error("features and posteriors disagree in shape");
}

/// Activity indicators of the listed sources as K x T doubles.
std::vector<double> activity_rows(const ActivityMatrix& acts, const SourceSet& set) {
  const std::size_t frames = acts.num_frames();
  std::vector<double> rows(set.size() * frames);
  for (std::size_t i = 0; i < set.size(); ++i)
    for (std::size_t t = 0; t < frames; ++t) rows[i * frames + t] = acts(t, set[i]) ? 1.0 : 0.0;
  return rows;
}

struct InvertedShape {
  linalg::CMatrix inverse;
  double log_det;
};

InvertedShape invert_shape(std::span<const cplx> b, std::size_t m, double eps, std::size_t source,
                           std::size_t f) {
  const auto reg = linalg::regularized(b, m, eps);
  linalg::CMatrix l(m * m);
  if (!linalg::cholesky(reg, m, l))
    throw Error("shape matrix of source " + std::to_string(source) + " at bin " +
                std::to_string(f) + " is singular");
  InvertedShape out{linalg::CMatrix(m * m), linalg::log_det_cholesky(l, m)};
  linalg::inverse_cholesky(l, m, out.inverse);
  return out;
}

void normalize_trace(std::span<cplx> b, std::size_t m) {
  const double tr = linalg::trace(b, m).real();
  if (!(tr > 0.0) || !std::isfinite(tr)) return;
  const double scale = static_cast<double>(m) / tr;
  for (auto& v : b) v *= scale;
}

}  // namespace

CacgmmState::CacgmmState(std::size_t num_freqs, std::size_t num_channels, std::size_t num_sources)
    : freqs_(num_freqs), channels_(num_channels) {
  add_sources(num_sources);
}

void CacgmmState::add_sources(std::size_t total) {
  if (total <= sources_) return;
  const std::size_t mm = channels_ * channels_;
  std::vector<double> alpha(freqs_ * total, 0.0), accum(freqs_ * total, 0.0);
  std::vector<cplx> shapes(freqs_ * total * mm);
  for (std::size_t f = 0; f < freqs_; ++f) {
    for (std::size_t k = 0; k < sources_; ++k) {
      alpha[f * total + k] = alpha_[f * sources_ + k];
      accum[f * total + k] = accum_[f * sources_ + k];
      std::copy_n(shapes_.begin() + (f * sources_ + k) * mm, mm, shapes.begin() + (f * total + k) * mm);
    }
  }
  alpha_ = std::move(alpha);
  accum_ = std::move(accum);
  shapes_ = std::move(shapes);
  sources_ = total;
}

FreqPlanes normalize_features(const FreqPlanes& raw, std::size_t threads) {
  FreqPlanes out(raw.freqs(), raw.channels(), raw.frames());
  const auto& k = kernels::active();
  parallel_for(raw.freqs(), threads, [&](std::size_t f) {
    k.normalize(planes_at(raw, f),
                {out.re(f), out.im(f), out.channels(), out.frames(), out.frames()});
  });
  return out;
}

PosteriorBlock init_posteriors_from_activities(const ActivityMatrix& activities,
                                               std::size_t num_freqs) {
  const std::size_t frames = activities.num_frames(), sources = activities.num_sources();
  PosteriorBlock out(frames, num_freqs, sources);
  std::vector<double> frame_gamma(sources);
  for (std::size_t t = 0; t < frames; ++t) {
    std::size_t count = 0;
    for (std::size_t k = 0; k < sources; ++k) count += activities(t, k) ? 1 : 0;
    if (count == 0) throw Error("frame " + std::to_string(t) + " has no active source");
    for (std::size_t k = 0; k < sources; ++k)
      frame_gamma[k] = activities(t, k) ? 1.0 / static_cast<double>(count) : 0.0;
    for (std::size_t f = 0; f < num_freqs; ++f)
      for (std::size_t k = 0; k < sources; ++k) out(t, f, k) = frame_gamma[k];
  }
  return out;
}

SourceSet active_sources(const ActivityMatrix& activities) {
  SourceSet out{kNoiseSource};
  for (std::size_t k = 1; k < activities.num_sources(); ++k)
    for (std::size_t t = 0; t < activities.num_frames(); ++t)
      if (activities(t, k)) {
        out.push_back(k);
        break;
      }
  return out;
}

PosteriorBlock e_step_guided(const FreqPlanes& unit, const ActivityMatrix& activities,
                             const CacgmmState& state, const SourceSet& active,
                             const CacgmmOptions& options, std::size_t threads) {
  if (active.empty()) throw Error("e-step needs at least one source");
  if (activities.num_frames() != unit.frames()) throw Error("e-step: activity length mismatch");
  const std::size_t frames = unit.frames(), freqs = unit.freqs(), m = unit.channels();
  const std::size_t n = active.size();
  PosteriorBlock out(frames, freqs, activities.num_sources());
  const auto d = activity_rows(activities, active);
  const auto& kern = kernels::active();

  parallel_for(freqs, threads, [&](std::size_t f) {
    std::vector<double> q(n * frames), g(n * frames), logc(n), c(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = active[i];
      const auto inv = invert_shape(state.shape(f, k), m, options.shape_regularization, k, f);
      kern.quadratic(inv.inverse.data(), planes_at(unit, f), q.data() + i * frames);
      logc[i] = std::log(state.alpha(f, k)) - inv.log_det;
    }
    const double top = *std::max_element(logc.begin(), logc.end());
    for (std::size_t i = 0; i < n; ++i) c[i] = std::isfinite(top) ? std::exp(logc[i] - top) : 1.0;
    kern.posteriors(q.data(), c.data(), d.data(), n, frames, frames, static_cast<int>(m), g.data());
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(g.data() + i * frames, frames, out.row(f, active[i]));
  });
  return out;
}

void m_step_alpha(const PosteriorBlock& gammas, const SourceSet& active, CacgmmState& state) {
  const std::size_t frames = gammas.num_frames();
  if (frames == 0) throw Error("mixture weights need at least one frame");
  const double inv = 1.0 / static_cast<double>(frames);
  for (std::size_t f = 0; f < gammas.num_freqs(); ++f) {
    for (std::size_t k : active) {
      const double* row = gammas.row(f, k);
      double s = 0.0;
      for (std::size_t t = 0; t < frames; ++t) s += row[t];
      state.alpha(f, k) = s * inv;
    }
  }
}

ShapeEstimate compute_block_shape(const FreqPlanes& unit, const PosteriorBlock& gammas,
                                  const CacgmmState& state, std::size_t source,
                                  ShapeWeighting weighting, const CacgmmOptions& options,
                                  std::size_t threads) {
  check_shapes(unit, gammas);
  const std::size_t frames = unit.frames(), freqs = unit.freqs(), m = unit.channels();
  ShapeEstimate est{std::vector<cplx>(freqs * m * m), std::vector<bool>(freqs, false),
                    std::vector<double>(freqs, 0.0)};
  std::vector<char> degenerate(freqs, 0);
  const auto& kern = kernels::active();

  parallel_for(freqs, threads, [&](std::size_t f) {
    const double* gamma = gammas.row(f, source);
    double mass = 0.0;
    for (std::size_t t = 0; t < frames; ++t) mass += gamma[t];
    est.mass[f] = mass;
    if (!(mass > 0.0)) {
      degenerate[f] = 1;
      return;
    }
    std::vector<double> w(gamma, gamma + frames);
    if (weighting == ShapeWeighting::weighted) {
      const auto inv = invert_shape(state.shape(f, source), m, options.shape_regularization, source, f);
      std::vector<double> q(frames);
      kern.quadratic(inv.inverse.data(), planes_at(unit, f), q.data());
      for (std::size_t t = 0; t < frames; ++t) w[t] = gamma[t] / q[t];
    }
    cplx* out = est.matrices.data() + f * m * m;
    kern.weighted_outer(w.data(), planes_at(unit, f), out);
    const double scale = static_cast<double>(m) / mass;
    for (std::size_t i = 0; i < m * m; ++i) out[i] *= scale;
  });
  for (std::size_t f = 0; f < freqs; ++f) est.degenerate[f] = degenerate[f] != 0;
  return est;
}

ShapeUpdateStats m_step_shape(const FreqPlanes& unit, const PosteriorBlock& gammas,
                              CacgmmState& state, const SourceSet& active,
                              ShapeWeighting weighting, const CacgmmOptions& options,
                              std::size_t threads) {
  ShapeUpdateStats stats;
  const std::size_t m = unit.channels();
  for (std::size_t k : active) {
    const auto est = compute_block_shape(unit, gammas, state, k, weighting, options, threads);
    for (std::size_t f = 0; f < unit.freqs(); ++f) {
      if (est.degenerate[f]) {
        ++stats.degenerate;
        continue;
      }
      auto b = state.shape(f, k);
      std::copy_n(est.at(f, m).begin(), m * m, b.begin());
      if (options.normalize_shapes) normalize_trace(b, m);
    }
  }
  return stats;
}

ShapeUpdateStats update_shape_accumulation(CacgmmState& state, std::size_t source,
                                           std::span<const double> block_mass,
                                           const ShapeEstimate& estimate,
                                           const CacgmmOptions& options) {
  ShapeUpdateStats stats;
  const std::size_t m = state.num_channels();
  for (std::size_t f = 0; f < state.num_freqs(); ++f) {
    const double prior = state.accum(f, source);
    const double mass = block_mass[f];
    const double total = prior + mass;
    if (!(total > 0.0)) {
      ++stats.degenerate;
      continue;
    }
    if (mass > 0.0) {
      auto b = state.shape(f, source);
      const auto plus = estimate.at(f, m);
      const double keep = prior / total, take = mass / total;
      for (std::size_t i = 0; i < m * m; ++i) b[i] = keep * b[i] + take * plus[i];
      if (options.normalize_shapes) normalize_trace(b, m);
    }
    state.accum(f, source) = total;
  }
  return stats;
}

ShapeUpdateStats update_shape_decay(CacgmmState& state, std::size_t source,
                                    std::span<const double> block_mass,
                                    const ShapeEstimate& estimate, double eta,
                                    const CacgmmOptions& options) {
  if (!(eta >= 0.0 && eta < 1.0)) throw Error("decay factor must lie in [0, 1)");
  ShapeUpdateStats stats;
  const std::size_t m = state.num_channels();
  for (std::size_t f = 0; f < state.num_freqs(); ++f) {
    if (estimate.degenerate[f]) ++stats.degenerate;
    auto b = state.shape(f, source);
    const auto plus = estimate.at(f, m);
    for (std::size_t i = 0; i < m * m; ++i) b[i] = eta * b[i] + plus[i];
    if (options.normalize_shapes) normalize_trace(b, m);
    state.accum(f, source) += block_mass[f];
  }
  return stats;
}

double mixture_log_likelihood(const FreqPlanes& unit, const ActivityMatrix& activities,
                              const CacgmmState& state, const SourceSet& active,
                              const CacgmmOptions& options) {
  const std::size_t frames = unit.frames(), m = unit.channels(), n = active.size();
  const double md = static_cast<double>(m);
  // log((M-1)! / (2 pi^M))
  const double log_norm = std::lgamma(md) - std::log(2.0) - md * std::log(std::numbers::pi);
  double total = 0.0;
  std::vector<double> q(n * frames), logc(n);
  std::vector<cplx> x(m);
  for (std::size_t f = 0; f < unit.freqs(); ++f) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = active[i];
      const auto inv = invert_shape(state.shape(f, k), m, options.shape_regularization, k, f);
      for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t c = 0; c < m; ++c) x[c] = unit.at(t, f, c);
        q[i * frames + t] = linalg::quadratic_form(inv.inverse, m, x);
      }
      logc[i] = std::log(state.alpha(f, k)) - inv.log_det + log_norm;
    }
    for (std::size_t t = 0; t < frames; ++t) {
      double top = -std::numeric_limits<double>::infinity();
      std::vector<double> terms;
      terms.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        if (!activities(t, active[i])) continue;
        terms.push_back(logc[i] - md * std::log(q[i * frames + t]));
        top = std::max(top, terms.back());
      }
      double s = 0.0;
      for (double v : terms) s += std::exp(v - top);
      total += top + std::log(s);
    }
  }
  return total / static_cast<double>(frames);
}

OfflineEmResult offline_em(const FreqPlanes& unit, const ActivityMatrix& activities,
                           std::size_t iterations, const CacgmmOptions& options,
                           std::size_t threads, bool trace_likelihood) {
  if (iterations < 1) throw Error("offline EM needs at least one iteration");
  OfflineEmResult result;
  result.active = active_sources(activities);
  result.state = CacgmmState(unit.freqs(), unit.channels(), activities.num_sources());
  result.gammas = init_posteriors_from_activities(activities, unit.freqs());
  for (std::size_t it = 0; it < iterations; ++it) {
    m_step_alpha(result.gammas, result.active, result.state);
    m_step_shape(unit, result.gammas, result.state, result.active,
                 it == 0 ? ShapeWeighting::unweighted : ShapeWeighting::weighted, options, threads);
    if (trace_likelihood)
      result.log_likelihood.push_back(
          mixture_log_likelihood(unit, activities, result.state, result.active, options));
    result.gammas = e_step_guided(unit, activities, result.state, result.active, options, threads);
  }
  return result;
}

}  // namespace bogss
