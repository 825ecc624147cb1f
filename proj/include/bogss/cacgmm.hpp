#pragma once

// Complex angular central Gaussian mixture model with activity-guided
// posteriors. Source 0 is noise and is active on every frame.
//
// Offline EM and the block-online shape updates share the primitives below.
// Everything works per frequency bin; frequency loops take a thread count
// and produce identical results for any count.

#include <cstddef>
#include <span>
#include <vector>

#include "bogss/diarization.hpp"
#include "bogss/types.hpp"

namespace bogss {

inline constexpr std::size_t kNoiseSource = 0;

struct CacgmmOptions {
  /// Diagonal loading eps * trace(B)/M applied before every inversion.
  double shape_regularization = 1e-6;
  /// Rescale every updated shape matrix to trace M.
  bool normalize_shapes = true;
};

/// Sorted source indices.
using SourceSet = std::vector<std::size_t>;

/// Posteriors gamma(t, f, k), stored so that each (f, k) row is contiguous in t.
class PosteriorBlock {
 public:
  PosteriorBlock() = default;
  PosteriorBlock(std::size_t frames, std::size_t freqs, std::size_t sources)
      : frames_(frames), freqs_(freqs), sources_(sources), data_(frames * freqs * sources, 0.0) {}

  std::size_t num_frames() const { return frames_; }
  std::size_t num_freqs() const { return freqs_; }
  std::size_t num_sources() const { return sources_; }

  double& operator()(std::size_t t, std::size_t f, std::size_t k) {
    return data_[(f * sources_ + k) * frames_ + t];
  }
  double operator()(std::size_t t, std::size_t f, std::size_t k) const {
    return data_[(f * sources_ + k) * frames_ + t];
  }
  double* row(std::size_t f, std::size_t k) { return data_.data() + (f * sources_ + k) * frames_; }
  const double* row(std::size_t f, std::size_t k) const {
    return data_.data() + (f * sources_ + k) * frames_;
  }

  bool operator==(const PosteriorBlock&) const = default;

 private:
  std::size_t frames_ = 0, freqs_ = 0, sources_ = 0;
  std::vector<double> data_;
};

/// Mixture weights, shape matrices and accumulated posterior mass.
class CacgmmState {
 public:
  CacgmmState() = default;
  CacgmmState(std::size_t num_freqs, std::size_t num_channels, std::size_t num_sources);

  std::size_t num_freqs() const { return freqs_; }
  std::size_t num_channels() const { return channels_; }
  std::size_t num_sources() const { return sources_; }

  double& alpha(std::size_t f, std::size_t k) { return alpha_[f * sources_ + k]; }
  double alpha(std::size_t f, std::size_t k) const { return alpha_[f * sources_ + k]; }
  double& accum(std::size_t f, std::size_t k) { return accum_[f * sources_ + k]; }
  double accum(std::size_t f, std::size_t k) const { return accum_[f * sources_ + k]; }
  std::span<cplx> shape(std::size_t f, std::size_t k) {
    const std::size_t mm = channels_ * channels_;
    return {shapes_.data() + (f * sources_ + k) * mm, mm};
  }
  std::span<const cplx> shape(std::size_t f, std::size_t k) const {
    const std::size_t mm = channels_ * channels_;
    return {shapes_.data() + (f * sources_ + k) * mm, mm};
  }

  /// Appends zero-initialized sources.
  void add_sources(std::size_t total);

  bool operator==(const CacgmmState&) const = default;

 private:
  std::size_t freqs_ = 0, channels_ = 0, sources_ = 0;
  std::vector<double> alpha_;
  std::vector<cplx> shapes_;
  std::vector<double> accum_;
};

/// Unit-norm copy of the features, zero vectors replaced by e_0.
FreqPlanes normalize_features(const FreqPlanes& raw, std::size_t threads = 1);

/// Posteriors uniform over the sources active at each frame, equal across f.
PosteriorBlock init_posteriors_from_activities(const ActivityMatrix& activities,
                                               std::size_t num_freqs);

/// Sources with at least one active frame; always contains noise.
SourceSet active_sources(const ActivityMatrix& activities);

/// Guided posteriors for the sources in `active`; zero elsewhere.
PosteriorBlock e_step_guided(const FreqPlanes& unit, const ActivityMatrix& activities,
                             const CacgmmState& state, const SourceSet& active,
                             const CacgmmOptions& options = {}, std::size_t threads = 1);

/// alpha(f, k) = mean over frames of gamma, for k in `active`.
void m_step_alpha(const PosteriorBlock& gammas, const SourceSet& active, CacgmmState& state);

enum class ShapeWeighting { unweighted, weighted };

/// Per-frequency shape estimate for one source:
///   M * sum_t gamma x x^H / w_t / sum_t gamma
/// with w_t = x^H B^-1 x (weighted, B read from state) or 1 (unweighted).
/// Returns F row-major matrices; `degenerate[f]` is set where sum_t gamma
/// vanishes, and that matrix is left zero.
struct ShapeEstimate {
  std::vector<cplx> matrices;
  std::vector<bool> degenerate;
  std::vector<double> mass;  // sum_t gamma per f

  std::span<const cplx> at(std::size_t f, std::size_t m) const {
    return {matrices.data() + f * m * m, m * m};
  }
};

ShapeEstimate compute_block_shape(const FreqPlanes& unit, const PosteriorBlock& gammas,
                                  const CacgmmState& state, std::size_t source,
                                  ShapeWeighting weighting, const CacgmmOptions& options = {},
                                  std::size_t threads = 1);

struct ShapeUpdateStats {
  std::size_t degenerate = 0;
};

/// Full M-step for the shape matrices of every source in `active`: B is
/// replaced by the estimate; degenerate bins keep their previous matrix.
ShapeUpdateStats m_step_shape(const FreqPlanes& unit, const PosteriorBlock& gammas,
                              CacgmmState& state, const SourceSet& active,
                              ShapeWeighting weighting, const CacgmmOptions& options = {},
                              std::size_t threads = 1);

/// Posterior-mass weighted blend of B with the block estimate, then
/// Gamma += block mass. `block_mass[f]` is sum of gamma over the block
/// frames only. Bins where Gamma + mass is zero are left alone and counted.
ShapeUpdateStats update_shape_accumulation(CacgmmState& state, std::size_t source,
                                           std::span<const double> block_mass,
                                           const ShapeEstimate& estimate,
                                           const CacgmmOptions& options = {});

/// B <- eta * B + block estimate. Throws Error unless 0 <= eta < 1.
/// Gamma still accumulates `block_mass` for bookkeeping.
ShapeUpdateStats update_shape_decay(CacgmmState& state, std::size_t source,
                                    std::span<const double> block_mass,
                                    const ShapeEstimate& estimate, double eta,
                                    const CacgmmOptions& options = {});

/// Mean over frames of sum_f log sum_k alpha d A(x; B) for the sources in
/// `active`, with the same regularized B the E-step uses.
double mixture_log_likelihood(const FreqPlanes& unit, const ActivityMatrix& activities,
                              const CacgmmState& state, const SourceSet& active,
                              const CacgmmOptions& options = {});

struct OfflineEmResult {
  PosteriorBlock gammas;
  CacgmmState state;
  SourceSet active;
  /// Log-likelihood after each iteration's M-step, when requested.
  std::vector<double> log_likelihood;
};

/// Guided EM from activity initialization: the first iteration uses the
/// unweighted shape update, later ones the weighted update; every
/// iteration ends with a guided E-step.
OfflineEmResult offline_em(const FreqPlanes& unit, const ActivityMatrix& activities,
                           std::size_t iterations, const CacgmmOptions& options = {},
                           std::size_t threads = 1, bool trace_likelihood = false);

}  // namespace bogss
