#include "bogss/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace bogss {
namespace {

constexpr double kEdgeMarginSec = 0.5;
constexpr double kMinUttSec = 1.5, kMaxUttSec = 4.5;
constexpr double kMinPauseSec = 0.2, kMaxPauseSec = 1.0;
constexpr double kSameSpeakerGapSec = 0.1;
constexpr double kInitialPauseProb = 0.3;
constexpr double kMaxDriftSamplesPerSec = 0.5;

// Fractional delay by a Hann-windowed sinc, tabulated on a fine grid.
constexpr int kSincHalf = 16;
constexpr int kSincTaps = 2 * kSincHalf + 1;
constexpr int kFracSteps = 512;

const std::vector<double>& sinc_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t((kFracSteps + 1) * kSincTaps);
    for (int s = 0; s <= kFracSteps; ++s) {
      const double frac = static_cast<double>(s) / kFracSteps;
      for (int j = 0; j < kSincTaps; ++j) {
        const double x = (j - kSincHalf) - frac;
        const double sinc = std::abs(x) < 1e-12 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
        const double win = 0.5 + 0.5 * std::cos(std::numbers::pi * x / (kSincHalf + 1));
        t[s * kSincTaps + j] = sinc * win;
      }
    }
    return t;
  }();
  return table;
}

struct Tap {
  double delay;  // samples
  double gain;
};

/// out[n] += sum_taps gain * src(n - delay - drift * n / fs).
void add_delayed(const Signal& src, const std::vector<Tap>& taps, double drift_per_sample,
                 Signal& out) {
  const auto& table = sinc_table();
  const auto n_total = static_cast<std::ptrdiff_t>(src.size());
  for (const Tap& tap : taps) {
    for (std::ptrdiff_t n = 0; n < n_total; ++n) {
      const double d = tap.delay + drift_per_sample * static_cast<double>(n);
      const double pos = static_cast<double>(n) - d;
      const double base = std::floor(pos);
      const auto step = static_cast<int>(std::lround((pos - base) * kFracSteps));
      const auto i0 = static_cast<std::ptrdiff_t>(base);
      const double* h = table.data() + static_cast<std::size_t>(step) * kSincTaps;
      double acc = 0.0;
      for (int j = 0; j < kSincTaps; ++j) {
        const std::ptrdiff_t i = i0 + (j - kSincHalf);
        if (i >= 0 && i < n_total) acc += h[j] * src[static_cast<std::size_t>(i)];
      }
      out[static_cast<std::size_t>(n)] += tap.gain * acc;
    }
  }
}

struct Utterance {
  std::size_t speaker;
  double start, end;
};

struct Timeline {
  std::vector<double> lengths;
  std::vector<double> pauses;       // per gap, 0 when the gap is an overlap
  std::vector<double> overlap_max;  // per gap
  std::vector<double> shape;        // per gap, relative overlap in [0.3, 1]
};

double overlap_of(const Timeline& tl, std::size_t gap, double c) {
  return tl.pauses[gap] > 0.0 ? 0.0 : std::min(c * tl.shape[gap], 1.0) * tl.overlap_max[gap];
}

/// Overlap scale c for the first n utterances such that total overlap over
/// total speech equals `ratio`; each gap overlaps min(c * shape, 1) of its
/// maximum. Negative when even maximal overlaps fall short.
double overlap_scale(const Timeline& tl, std::size_t n, double ratio) {
  double total_len = 0.0, shape_min = 1.0;
  for (std::size_t i = 0; i < n; ++i) total_len += tl.lengths[i];
  for (std::size_t g = 0; g + 1 < n; ++g) shape_min = std::min(shape_min, tl.shape[g]);
  const auto achieved = [&](double c) {
    double o = 0.0;
    for (std::size_t g = 0; g + 1 < n; ++g) o += overlap_of(tl, g, c);
    return o / (total_len - o);
  };
  if (ratio == 0.0) return 0.0;
  double hi = 1.0 / shape_min;
  if (achieved(hi) < ratio) return -1.0;
  double lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (achieved(mid) < ratio ? lo : hi) = mid;
  }
  return hi;
}

double span_seconds(const Timeline& tl, std::size_t n, double c) {
  double span = 0.0;
  for (std::size_t i = 0; i < n; ++i) span += tl.lengths[i];
  for (std::size_t g = 0; g + 1 < n; ++g) span += tl.pauses[g] > 0.0 ? tl.pauses[g] : -overlap_of(tl, g, c);
  return span;
}

std::vector<Utterance> draw_utterances(const SceneSpec& spec, std::mt19937_64& rng) {
  const double available = spec.duration_sec - 2.0 * kEdgeMarginSec;
  std::uniform_real_distribution<double> len_dist(kMinUttSec, kMaxUttSec);
  std::uniform_real_distribution<double> pause_dist(kMinPauseSec, kMaxPauseSec);
  std::uniform_real_distribution<double> shape_dist(0.3, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto max_count = static_cast<std::size_t>(std::ceil(available / (0.5 * kMinUttSec))) + 2;

  for (int attempt = 0; attempt < 32; ++attempt) {
    const double pause_prob = attempt >= 8 ? 0.0 : kInitialPauseProb * std::pow(0.5, attempt);
    Timeline tl;
    for (std::size_t i = 0; i < max_count; ++i) tl.lengths.push_back(len_dist(rng));
    for (std::size_t g = 0; g + 1 < max_count; ++g) {
      const bool pause = unit(rng) < pause_prob;
      tl.pauses.push_back(pause ? pause_dist(rng) : 0.0);
      tl.overlap_max.push_back(0.5 * (std::min(tl.lengths[g], tl.lengths[g + 1]) - kSameSpeakerGapSec));
      tl.shape.push_back(attempt >= 16 ? 1.0 : shape_dist(rng));
    }
    std::size_t n = max_count;
    double c = -1.0;
    for (; n >= 2; --n) {
      c = overlap_scale(tl, n, spec.overlap_ratio);
      if (c >= 0.0 && span_seconds(tl, n, c) <= available) break;
    }
    if (n < 2 || c < 0.0) continue;

    std::vector<std::size_t> order(spec.num_speakers);
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::shuffle(order.begin(), order.end(), rng);
    if (n < spec.num_speakers) continue;
    std::vector<Utterance> out;
    double t = kEdgeMarginSec;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t spk;
      if (i < spec.num_speakers) {
        spk = order[i];
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, spec.num_speakers - 2);
        spk = pick(rng);
        if (spk >= out.back().speaker) ++spk;
      }
      out.push_back({spk, t, t + tl.lengths[i]});
      if (i + 1 < n)
        t = out.back().end + (tl.pauses[i] > 0.0 ? tl.pauses[i] : -overlap_of(tl, i, c));
    }
    return out;
  }
  throw Error("overlap ratio " + std::to_string(spec.overlap_ratio) +
              " is not achievable with the scene generator");
}

struct SpeakerVoice {
  double a1, a2;  // resonance
  double tilt;    // one-pole low-pass coefficient
  double mod_hz;
};

Signal render_source(const std::vector<Utterance>& utts, std::size_t speaker,
                     const SpeakerVoice& voice, std::size_t samples, int fs,
                     std::mt19937_64& rng) {
  Signal out(samples, 0.0);
  std::normal_distribution<double> white(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> gain_db(-3.0, 3.0);
  const auto fade = static_cast<std::size_t>(0.01 * fs);
  for (const auto& u : utts) {
    if (u.speaker != speaker) continue;
    const auto begin = static_cast<std::size_t>(std::ceil(u.start * fs));
    const auto end = std::min(samples, static_cast<std::size_t>(std::floor(u.end * fs)));
    if (end <= begin) continue;
    Signal seg(end - begin);
    double y1 = 0.0, y2 = 0.0, lp = 0.0;
    for (auto& v : seg) {
      const double y = white(rng) + voice.a1 * y1 + voice.a2 * y2;
      y2 = y1;
      y1 = y;
      lp = (1.0 - voice.tilt) * y + voice.tilt * lp;
      v = lp;
    }
    const double ph = phase(rng);
    for (std::size_t i = 0; i < seg.size(); ++i) {
      const double s = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * voice.mod_hz * i / fs + ph);
      seg[i] *= s * s;
    }
    double energy = 0.0;
    for (double v : seg) energy += v * v;
    const double scale =
        std::pow(10.0, gain_db(rng) / 20.0) / std::sqrt(energy / static_cast<double>(seg.size()) + 1e-30);
    for (std::size_t i = 0; i < seg.size(); ++i) {
      double w = 1.0;
      if (i < fade) w = 0.5 - 0.5 * std::cos(std::numbers::pi * i / fade);
      if (seg.size() - 1 - i < fade) w = std::min(w, 0.5 - 0.5 * std::cos(std::numbers::pi * (seg.size() - 1 - i) / fade));
      out[begin + i] = 0.1 * scale * w * seg[i];
    }
  }
  return out;
}

}  // namespace

void SceneSpec::validate() const {
  if (num_speakers < 2 || num_speakers > 4) throw Error("scene needs 2 to 4 speakers");
  if (num_channels < 2 || num_channels > 8) throw Error("scene needs 2 to 8 channels");
  if (!(duration_sec >= 5.0)) throw Error("scene must last at least 5 s");
  if (!(overlap_ratio >= 0.0 && overlap_ratio < 1.0)) throw Error("overlap ratio must lie in [0, 1)");
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
    throw Error("SNR must be a number or +inf");
  if (sample_rate_hz <= 0) throw Error("sample rate must be positive");
}

Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const int fs = spec.sample_rate_hz;
  const auto samples = static_cast<std::size_t>(std::llround(spec.duration_sec * fs));
  const auto utts = draw_utterances(spec, rng);

  Scene scene;
  for (std::size_t k = 0; k < spec.num_speakers; ++k) scene.labels.push_back("spk" + std::to_string(k + 1));
  for (const auto& u : utts) scene.segments.push_back({scene.labels[u.speaker], u.start, u.end});

  std::uniform_real_distribution<double> radius(0.85, 0.95), angle(0.05, 0.3), tilt(0.3, 0.7),
      mod(3.0, 6.0), direct(48.0, 58.0), gain(0.6, 1.0), refl_delay(30.0, 300.0),
      refl_gain(0.1, 0.35), drift(-kMaxDriftSamplesPerSec, kMaxDriftSamplesPerSec);
  std::bernoulli_distribution sign(0.5);

  scene.mixture.assign(spec.num_channels, Signal(samples, 0.0));
  for (std::size_t k = 0; k < spec.num_speakers; ++k) {
    const double r = radius(rng), th = angle(rng) * std::numbers::pi;
    const SpeakerVoice voice{2.0 * r * std::cos(th), -r * r, tilt(rng), mod(rng)};
    scene.references.push_back(render_source(utts, k, voice, samples, fs, rng));
    MultiSignal image(spec.num_channels, Signal(samples, 0.0));
    for (std::size_t m = 0; m < spec.num_channels; ++m) {
      const double d0 = direct(rng), g0 = gain(rng);
      std::vector<Tap> taps{{d0, g0}};
      for (int j = 0; j < 4; ++j) taps.push_back({d0 + refl_delay(rng), (sign(rng) ? 1.0 : -1.0) * refl_gain(rng) * g0});
      const double rate = spec.moving ? drift(rng) / fs : 0.0;
      add_delayed(scene.references[k], taps, rate, image[m]);
      for (std::size_t n = 0; n < samples; ++n) scene.mixture[m][n] += image[m][n];
    }
    scene.images.push_back(std::move(image));
  }

  scene.noise.assign(spec.num_channels, Signal(samples, 0.0));
  if (std::isfinite(spec.snr_db)) {
    double power = 0.0;
    std::size_t count = 0;
    for (std::size_t n = 0; n < samples; ++n) {
      bool any = false;
      for (const auto& ref : scene.references) any = any || ref[n] != 0.0;
      if (!any) continue;
      for (std::size_t m = 0; m < spec.num_channels; ++m) power += scene.mixture[m][n] * scene.mixture[m][n];
      count += spec.num_channels;
    }
    const double sigma = count ? std::sqrt(power / count / std::pow(10.0, spec.snr_db / 10.0)) : 0.0;
    std::normal_distribution<double> white(0.0, sigma);
    for (std::size_t m = 0; m < spec.num_channels; ++m)
      for (std::size_t n = 0; n < samples; ++n) {
        scene.noise[m][n] = white(rng);
        scene.mixture[m][n] += scene.noise[m][n];
      }
  }
  return scene;
}

namespace {

/// Sweep over segment boundaries, summing time with >= 1 and >= 2 segments.
std::pair<double, double> coverage(const SegmentList& segments) {
  std::vector<std::pair<double, int>> events;
  for (const auto& s : segments) {
    events.push_back({s.start_sec, +1});
    events.push_back({s.end_sec, -1});
  }
  std::sort(events.begin(), events.end());
  double one = 0.0, two = 0.0, prev = 0.0;
  int depth = 0;
  for (const auto& [t, delta] : events) {
    if (depth >= 1) one += t - prev;
    if (depth >= 2) two += t - prev;
    depth += delta;
    prev = t;
  }
  return {one, two};
}

}  // namespace

double measure_overlap_ratio(const SegmentList& segments) {
  const auto [one, two] = coverage(segments);
  return one > 0.0 ? two / one : 0.0;
}

double speech_union_seconds(const SegmentList& segments) { return coverage(segments).first; }

double si_sdr(const Signal& estimate, const Signal& reference) {
  if (estimate.size() != reference.size()) throw Error("SI-SDR needs signals of equal length");
  double rr = 0.0, er = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    rr += reference[i] * reference[i];
    er += estimate[i] * reference[i];
  }
  if (!(rr > 0.0)) throw Error("SI-SDR reference is zero");
  const double a = er / rr;
  double target = 0.0, residual = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double s = a * reference[i];
    const double e = estimate[i] - s;
    target += s * s;
    residual += e * e;
  }
  if (!(residual > 0.0)) return kSiSdrCapDb;
  return std::min(kSiSdrCapDb, 10.0 * std::log10(target / residual));
}

}  // namespace bogss
