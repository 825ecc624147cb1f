#include "bogss/stft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace bogss {
namespace {

constexpr double kEdgeNormFloor = 0.1;

// FFTW's planner is not re-entrant; executing an existing plan on new
// arrays is. Plans are built once per length and kept for the process.
class FftPlans {
 public:
  struct Pair {
    fftw_plan forward;
    fftw_plan inverse;
  };

  static const Pair& get(std::size_t n) {
    static FftPlans instance;
    std::lock_guard lock(instance.mutex_);
    auto it = instance.plans_.find(n);
    if (it != instance.plans_.end()) return it->second;
    std::vector<double> real(n);
    std::vector<fftw_complex> spec(n / 2 + 1);
    const int len = static_cast<int>(n);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    Pair p{fftw_plan_dft_r2c_1d(len, real.data(), spec.data(), flags),
           fftw_plan_dft_c2r_1d(len, spec.data(), real.data(), flags)};
    if (!p.forward || !p.inverse) throw Error("FFTW plan creation failed");
    return instance.plans_.emplace(n, p).first->second;
  }

  ~FftPlans() {
    for (auto& [n, p] : plans_) {
      fftw_destroy_plan(p.forward);
      fftw_destroy_plan(p.inverse);
    }
  }

 private:
  std::mutex mutex_;
  std::map<std::size_t, Pair> plans_;
};

}  // namespace

void StftConfig::validate() const {
  if (sample_rate_hz <= 0) throw Error("sample rate must be positive");
  if (window_len_samples == 0 || hop_samples == 0) throw Error("window and hop must be positive");
  if (window_len_samples % 2 != 0) throw Error("window length must be even");
  if (hop_samples > window_len_samples) throw Error("hop must not exceed the window length");
}

std::vector<double> analysis_window(const StftConfig& config) {
  const std::size_t n = config.window_len_samples;
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

std::size_t frame_count(std::size_t samples, const StftConfig& config) {
  if (samples < config.window_len_samples) return 0;
  return 1 + (samples - config.window_len_samples) / config.hop_samples;
}

SpectralBlock analyze(const MultiSignal& audio, const StftConfig& config,
                      std::size_t start_frame_index) {
  config.validate();
  if (audio.empty() || audio.front().empty()) throw Error("analyze: empty input");
  const std::size_t len = audio.front().size();
  for (const auto& ch : audio)
    if (ch.size() != len) throw Error("analyze: channel length mismatch");
  if (len < config.window_len_samples) throw Error("analyze: input shorter than one window");

  const std::size_t n = config.window_len_samples;
  const std::size_t freqs = config.num_freqs();
  const std::size_t frames = frame_count(len, config);
  const auto window = analysis_window(config);
  const auto& plans = FftPlans::get(n);

  SpectralBlock out{CTensor3(frames, freqs, audio.size()), start_frame_index};
  std::vector<double> buf(n);
  std::vector<fftw_complex> spec(freqs);
  for (std::size_t m = 0; m < audio.size(); ++m) {
    for (std::size_t t = 0; t < frames; ++t) {
      const double* src = audio[m].data() + t * config.hop_samples;
      for (std::size_t i = 0; i < n; ++i) buf[i] = src[i] * window[i];
      fftw_execute_dft_r2c(plans.forward, buf.data(), spec.data());
      for (std::size_t f = 0; f < freqs; ++f) out.frames(t, f, m) = {spec[f][0], spec[f][1]};
    }
  }
  return out;
}

Signal synthesize(const CTensor2& frames, const StftConfig& config) {
  config.validate();
  const std::size_t n = config.window_len_samples;
  const std::size_t freqs = config.num_freqs();
  if (frames.rows() > 0 && frames.cols() != freqs) throw Error("synthesize: frequency count mismatch");
  const std::size_t count = frames.rows();
  if (count == 0) return {};

  const auto window = analysis_window(config);
  const auto& plans = FftPlans::get(n);
  const std::size_t len = (count - 1) * config.hop_samples + n;
  Signal out(len, 0.0);
  std::vector<double> norm(len, 0.0);
  std::vector<double> buf(n);
  std::vector<fftw_complex> spec(freqs);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t t = 0; t < count; ++t) {
    for (std::size_t f = 0; f < freqs; ++f) {
      spec[f][0] = frames(t, f).real();
      spec[f][1] = frames(t, f).imag();
    }
    // DC and Nyquist bins of a real signal carry no imaginary part.
    spec[0][1] = 0.0;
    spec[freqs - 1][1] = 0.0;
    fftw_execute_dft_c2r(plans.inverse, spec.data(), buf.data());
    const std::size_t off = t * config.hop_samples;
    for (std::size_t i = 0; i < n; ++i) {
      out[off + i] += buf[i] * scale * window[i];
      norm[off + i] += window[i] * window[i];
    }
  }
  // Edge samples covered only by window tails are tapered, not amplified.
  const double peak = *std::max_element(norm.begin(), norm.end());
  const double floor = kEdgeNormFloor * peak;
  for (std::size_t i = 0; i < len; ++i) out[i] /= std::max(norm[i], floor);
  return out;
}

}  // namespace bogss
