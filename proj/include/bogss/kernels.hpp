#pragma once

// Arithmetic inner loops shared by the mixture model and the beamformer.
//
// Every kernel exists as a portable scalar reference and, on x86-64, as an
// AVX2/FMA variant. The active table is chosen once at startup from CPUID and
// can be pinned with the BOGSS_ISA environment variable (`scalar` or `avx2`)
// or set_isa(). All variants vectorize along time for a single frequency.

#include <cstddef>
#include <string_view>

#include "bogss/types.hpp"

namespace bogss::kernels {

/// M channels of one frequency bin; channel m starts at re + m * stride.
struct ChannelPlanes {
  const double* re;
  const double* im;
  std::size_t channels;
  std::size_t stride;
  std::size_t frames;
};

struct MutablePlanes {
  double* re;
  double* im;
  std::size_t channels;
  std::size_t stride;
  std::size_t frames;
};

/// Unit-normalize each frame vector across channels. Zero vectors map to the
/// first basis vector.
using NormalizeFn = void (*)(ChannelPlanes x, MutablePlanes out);

/// q[t] = Re(x_t^H A x_t) for Hermitian A (row-major, channels x channels).
using QuadraticFn = void (*)(const cplx* a, ChannelPlanes x, double* q);

/// s = sum_t w[t] x_t x_t^H (full row-major matrix written, Hermitian by construction).
using WeightedOuterFn = void (*)(const double* w, ChannelPlanes x, cplx* s);

/// z[t] = w^H x_t.
using BeamformFn = void (*)(const cplx* w, ChannelPlanes x, double* z_re, double* z_im);

/// Guided cACG posteriors from precomputed quadratic forms.
///
/// For source k and frame t the unnormalized weight is
///   c[k] * d[k][t] * q[k][t]^(-power),
/// evaluated as c[k] * (q_min / q[k][t])^power with q_min the smallest q over
/// sources active at t, so nothing overflows for large channel counts. Rows
/// of q, d and gamma are `stride` apart. Frames whose weights all vanish or
/// are not finite fall back to d / sum(d).
using PosteriorFn = void (*)(const double* q, const double* c, const double* d, std::size_t sources,
                             std::size_t stride, std::size_t frames, int power, double* gamma);

struct KernelTable {
  std::string_view name;
  NormalizeFn normalize;
  QuadraticFn quadratic;
  WeightedOuterFn weighted_outer;
  BeamformFn beamform;
  PosteriorFn posteriors;
};

enum class Isa { scalar, avx2 };

bool isa_supported(Isa isa);
/// Table for a specific instruction set; throws Error if unsupported.
const KernelTable& table(Isa isa);
/// Currently active table.
const KernelTable& active();
Isa active_isa();
/// Pin the active table (process wide). Throws Error if unsupported.
void set_isa(Isa isa);

namespace scalar {
extern const KernelTable table;
}
#if defined(BOGSS_BUILD_AVX2)
namespace avx2 {
extern const KernelTable table;
}
#endif

}  // namespace bogss::kernels
