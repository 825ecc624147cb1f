#include "bogss/dereverb.hpp"

#include <algorithm>

#include "bogss/parallel.hpp"

namespace bogss {

namespace {
constexpr double kPowerFloor = 1e-10;
constexpr std::size_t kFreqChunk = 16;
constexpr double kInverseTraceLimit = 1e4;
}

void WpeConfig::validate() const {
  if (delay < 1) throw Error("WPE delay must be at least one frame");
  if (!(decay > 0.0 && decay <= 1.0)) throw Error("WPE decay must lie in (0, 1]");
  if (!(init_scale > 0.0)) throw Error("WPE init scale must be positive");
}

WpeState::WpeState(const WpeConfig& config, std::size_t num_freqs, std::size_t num_channels)
    : config_(config), freqs_(num_freqs), channels_(num_channels) {
  config_.validate();
  if (num_freqs == 0 || num_channels == 0) throw Error("WPE needs at least one frequency and channel");
  const std::size_t d = stacked_dim();
  inv_corr_.assign(freqs_ * d * d, cplx{});
  for (std::size_t f = 0; f < freqs_; ++f)
    for (std::size_t i = 0; i < d; ++i) inv_corr_[f * d * d + i * d + i] = config_.init_scale;
  filters_.assign(freqs_ * d * channels_, cplx{});
}

WpeState wpe_init(const WpeConfig& config, std::size_t num_freqs, std::size_t num_channels) {
  return WpeState(config, num_freqs, num_channels);
}

SpectralBlock wpe_process_block(WpeState& state, const SpectralBlock& block, std::size_t threads) {
  const std::size_t freqs = state.freqs_, chans = state.channels_;
  if (block.num_freqs() != freqs || block.num_channels() != chans)
    throw Error("WPE: block shape does not match state");
  if (state.passthrough()) return block;

  const std::size_t taps = state.config_.taps, delay = state.config_.delay;
  const double decay = state.config_.decay;
  const std::size_t d = state.stacked_dim();
  const std::size_t hist = state.history_.size();
  const std::size_t frames = block.num_frames();
  const std::size_t need = state.history_capacity();

  const double trace_limit = kInverseTraceLimit * state.config_.init_scale * static_cast<double>(d);

  SpectralBlock out = block;
  const std::size_t chunks = (freqs + kFreqChunk - 1) / kFreqChunk;
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t f_begin = c * kFreqChunk, f_end = std::min(freqs, f_begin + kFreqChunk);
    std::vector<cplx> stacked(d), u(d), y(chans);
    for (std::size_t t = 0; t < frames; ++t) {
      const std::size_t g = hist + t;
      if (g < need) continue;
      for (std::size_t f = f_begin; f < f_end; ++f) {
      // frame(g) for g < hist is history, else block frame g - hist.
      auto frame = [&](std::size_t gi, std::size_t m) -> cplx {
        return gi < hist ? state.history_[gi][f * chans + m] : block.frames(gi - hist, f, m);
      };
      cplx* inv = state.inv_corr_.data() + f * d * d;
      cplx* filt = state.filters_.data() + f * d * chans;
      for (std::size_t tap = 0; tap < taps; ++tap)
        for (std::size_t m = 0; m < chans; ++m) stacked[tap * chans + m] = frame(g - delay - tap, m);

      double power = 0.0;
      for (std::size_t m = 0; m < chans; ++m) {
        const cplx x = block.frames(t, f, m);
        power += std::norm(x);
        double pr = 0.0, pi = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const cplx a = filt[j * chans + m], b = stacked[j];
          pr += a.real() * b.real() + a.imag() * b.imag();
          pi += a.real() * b.imag() - a.imag() * b.real();
        }
        y[m] = {x.real() - pr, x.imag() - pi};
      }
      power /= static_cast<double>(chans);
      for (std::size_t m = 0; m < chans; ++m) out.frames(t, f, m) = y[m];
      // Silent frames would inflate the inverse correlation by 1/decay each step.
      if (power < kPowerFloor) continue;

      double denom = decay * power;
      for (std::size_t i = 0; i < d; ++i) {
        double sr = 0.0, si = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const cplx a = inv[i * d + j], b = stacked[j];
          sr += a.real() * b.real() - a.imag() * b.imag();
          si += a.real() * b.imag() + a.imag() * b.real();
        }
        u[i] = {sr, si};
        denom += stacked[i].real() * sr + stacked[i].imag() * si;
      }
      const double inv_denom = 1.0 / denom;
      const double inv_decay = 1.0 / decay;
      // R^-1 <- (R^-1 - k u^H) / decay with k = u / denom; upper triangle then mirror.
      for (std::size_t i = 0; i < d; ++i) {
        const double kr = u[i].real() * inv_denom, ki = u[i].imag() * inv_denom;
        inv[i * d + i] = (inv[i * d + i].real() - (kr * u[i].real() + ki * u[i].imag())) * inv_decay;
        for (std::size_t j = i + 1; j < d; ++j) {
          const cplx a = inv[i * d + j];
          const double vr = (a.real() - (kr * u[j].real() + ki * u[j].imag())) * inv_decay;
          const double vi = (a.imag() - (ki * u[j].real() - kr * u[j].imag())) * inv_decay;
          inv[i * d + j] = {vr, vi};
          inv[j * d + i] = {vr, -vi};
        }
        for (std::size_t m = 0; m < chans; ++m) {
          const cplx e = y[m];
          filt[i * chans + m] += cplx{kr * e.real() + ki * e.imag(), ki * e.real() - kr * e.imag()};
        }
      }
      // Directions the input never excites would otherwise grow by 1/decay per frame.
      double trace = 0.0;
      for (std::size_t i = 0; i < d; ++i) trace += inv[i * d + i].real();
      if (trace > trace_limit) {
        const double shrink = trace_limit / trace;
        for (std::size_t i = 0; i < d * d; ++i) inv[i] *= shrink;
      }
      }
    }
  });

  for (std::size_t t = 0; t < frames; ++t) {
    std::vector<cplx> raw(freqs * chans);
    for (std::size_t f = 0; f < freqs; ++f)
      for (std::size_t m = 0; m < chans; ++m) raw[f * chans + m] = block.frames(t, f, m);
    state.history_.push_back(std::move(raw));
    if (state.history_.size() > need) state.history_.pop_front();
  }
  return out;
}

}  // namespace bogss
