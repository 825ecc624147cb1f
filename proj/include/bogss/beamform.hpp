#pragma once

// Mask-based MVDR: covariances from posteriors, the trace-normalized MVDR
// solution, blind analytic normalization, SNR-driven reference selection.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "bogss/cacgmm.hpp"
#include "bogss/types.hpp"

namespace bogss {

struct SpatialCovariances {
  std::size_t freqs = 0, channels = 0;
  std::vector<cplx> speech;  // (F, M, M)
  std::vector<cplx> noise;   // (F, M, M)

  std::span<const cplx> speech_at(std::size_t f) const {
    return {speech.data() + f * channels * channels, channels * channels};
  }
  std::span<const cplx> noise_at(std::size_t f) const {
    return {noise.data() + f * channels * channels, channels * channels};
  }
  std::span<cplx> speech_at(std::size_t f) {
    return {speech.data() + f * channels * channels, channels * channels};
  }
  std::span<cplx> noise_at(std::size_t f) {
    return {noise.data() + f * channels * channels, channels * channels};
  }
};

struct BeamformerWeights {
  std::size_t freqs = 0, channels = 0;
  std::vector<cplx> weights;  // (F, M)
  std::size_t reference = 0;
  /// Bins whose MVDR trace vanished; their weights are zero.
  std::size_t zeroed_bins = 0;

  std::span<const cplx> at(std::size_t f) const { return {weights.data() + f * channels, channels}; }
  std::span<cplx> at(std::size_t f) { return {weights.data() + f * channels, channels}; }
};

struct BeamformerOptions {
  double noise_regularization = 1e-6;
  /// Skip SNR-based selection and always use this channel.
  std::optional<std::size_t> fixed_reference;
};

/// speech = (1/T) sum_t gamma_target x x^H, noise the complement, over all
/// frames of `raw` (unnormalized features). Target 0 (noise) is rejected.
SpatialCovariances spatial_covariances(const FreqPlanes& raw, const PosteriorBlock& gammas,
                                       std::size_t target, std::size_t threads = 1);

/// w_f = R_noise^-1 R_speech e_ref / trace(R_noise^-1 R_speech), R_noise
/// diagonally loaded first. Bins with |trace| < 1e-12 get zero weights.
BeamformerWeights mvdr_weights(const SpatialCovariances& cov, std::size_t reference,
                               const BeamformerOptions& options = {});

/// Real gain per bin sqrt(w^H Rn Rn w / M) / (w^H Rn w); degenerate bins keep gain 1.
void blind_analytic_normalization(BeamformerWeights& weights, const SpatialCovariances& cov);

struct ReferenceChoice {
  std::size_t channel = 0;
  /// Set when no channel produced a finite score.
  bool fallback = false;
  std::vector<double> scores;
};

/// Channel maximizing sum_f w^H Rs w / sum_f w^H Rn w of its MVDR beamformer;
/// ties go to the lowest index.
ReferenceChoice select_reference(const SpatialCovariances& cov, const BeamformerOptions& options = {});

/// Reference selection, MVDR and BAN in one go.
BeamformerWeights design_beamformer(const SpatialCovariances& cov,
                                    const BeamformerOptions& options = {});

/// z(t, f) = w_f^H x(t, f) for frames [first, first + count) of `raw`.
CTensor2 apply_beamformer(const BeamformerWeights& weights, const FreqPlanes& raw,
                          std::size_t first, std::size_t count);

}  // namespace bogss
