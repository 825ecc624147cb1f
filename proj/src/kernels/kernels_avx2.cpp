// AVX2/FMA variants. Four frames per register; the remainder goes through
// the scalar reference on an offset view.

#include <immintrin.h>

#include <cmath>
#include <limits>

#include "bogss/kernels.hpp"

namespace bogss::kernels::avx2 {
namespace {

constexpr std::size_t kLanes = 4;

inline ChannelPlanes tail_of(ChannelPlanes x, std::size_t start) {
  return {x.re + start, x.im + start, x.channels, x.stride, x.frames - start};
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void normalize(ChannelPlanes x, MutablePlanes out) {
  const std::size_t n = x.channels;
  const std::size_t body = x.frames - x.frames % kLanes;
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  for (std::size_t t = 0; t < body; t += kLanes) {
    __m256d energy = zero;
    for (std::size_t m = 0; m < n; ++m) {
      const __m256d r = _mm256_loadu_pd(x.re + m * x.stride + t);
      const __m256d i = _mm256_loadu_pd(x.im + m * x.stride + t);
      energy = _mm256_fmadd_pd(r, r, energy);
      energy = _mm256_fmadd_pd(i, i, energy);
    }
    const __m256d nonzero = _mm256_cmp_pd(energy, zero, _CMP_GT_OQ);
    const __m256d inv = _mm256_div_pd(one, _mm256_sqrt_pd(energy));
    for (std::size_t m = 0; m < n; ++m) {
      const __m256d r = _mm256_loadu_pd(x.re + m * x.stride + t);
      const __m256d i = _mm256_loadu_pd(x.im + m * x.stride + t);
      const __m256d fallback = m == 0 ? one : zero;
      _mm256_storeu_pd(out.re + m * out.stride + t,
                       _mm256_blendv_pd(fallback, _mm256_mul_pd(r, inv), nonzero));
      _mm256_storeu_pd(out.im + m * out.stride + t,
                       _mm256_blendv_pd(zero, _mm256_mul_pd(i, inv), nonzero));
    }
  }
  if (body < x.frames) {
    MutablePlanes o{out.re + body, out.im + body, out.channels, out.stride, out.frames - body};
    scalar::table.normalize(tail_of(x, body), o);
  }
}

void quadratic(const cplx* a, ChannelPlanes x, double* q) {
  const std::size_t n = x.channels;
  const std::size_t body = x.frames - x.frames % kLanes;
  const __m256d two = _mm256_set1_pd(2.0);
  for (std::size_t t = 0; t < body; t += kLanes) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < n; ++i) {
      const __m256d ri = _mm256_loadu_pd(x.re + i * x.stride + t);
      const __m256d ii = _mm256_loadu_pd(x.im + i * x.stride + t);
      const __m256d mag = _mm256_fmadd_pd(ri, ri, _mm256_mul_pd(ii, ii));
      acc = _mm256_fmadd_pd(_mm256_set1_pd(a[i * n + i].real()), mag, acc);
      __m256d cross = _mm256_setzero_pd();
      for (std::size_t j = i + 1; j < n; ++j) {
        const __m256d rj = _mm256_loadu_pd(x.re + j * x.stride + t);
        const __m256d ij = _mm256_loadu_pd(x.im + j * x.stride + t);
        const __m256d pr = _mm256_fmadd_pd(ri, rj, _mm256_mul_pd(ii, ij));
        const __m256d pi = _mm256_fmsub_pd(ri, ij, _mm256_mul_pd(ii, rj));
        cross = _mm256_fmadd_pd(_mm256_set1_pd(a[i * n + j].real()), pr, cross);
        cross = _mm256_fnmadd_pd(_mm256_set1_pd(a[i * n + j].imag()), pi, cross);
      }
      acc = _mm256_fmadd_pd(two, cross, acc);
    }
    _mm256_storeu_pd(q + t, acc);
  }
  if (body < x.frames) scalar::table.quadratic(a, tail_of(x, body), q + body);
}

void weighted_outer(const double* w, ChannelPlanes x, cplx* s) {
  const std::size_t n = x.channels;
  const std::size_t body = x.frames - x.frames % kLanes;
  for (std::size_t i = 0; i < n; ++i) {
    const double* ri = x.re + i * x.stride;
    const double* ii = x.im + i * x.stride;
    for (std::size_t j = i; j < n; ++j) {
      const double* rj = x.re + j * x.stride;
      const double* ij = x.im + j * x.stride;
      __m256d sr = _mm256_setzero_pd();
      __m256d si = _mm256_setzero_pd();
      for (std::size_t t = 0; t < body; t += kLanes) {
        const __m256d wv = _mm256_loadu_pd(w + t);
        const __m256d a_r = _mm256_loadu_pd(ri + t);
        const __m256d a_i = _mm256_loadu_pd(ii + t);
        const __m256d b_r = _mm256_loadu_pd(rj + t);
        const __m256d b_i = _mm256_loadu_pd(ij + t);
        const __m256d re = _mm256_fmadd_pd(a_r, b_r, _mm256_mul_pd(a_i, b_i));
        const __m256d im = _mm256_fmsub_pd(a_i, b_r, _mm256_mul_pd(a_r, b_i));
        sr = _mm256_fmadd_pd(wv, re, sr);
        si = _mm256_fmadd_pd(wv, im, si);
      }
      double accr = hsum(sr), acci = hsum(si);
      for (std::size_t t = body; t < x.frames; ++t) {
        accr += w[t] * (ri[t] * rj[t] + ii[t] * ij[t]);
        acci += w[t] * (ii[t] * rj[t] - ri[t] * ij[t]);
      }
      if (i == j) {
        s[i * n + i] = {accr, 0.0};
      } else {
        s[i * n + j] = {accr, acci};
        s[j * n + i] = {accr, -acci};
      }
    }
  }
}

void beamform(const cplx* w, ChannelPlanes x, double* z_re, double* z_im) {
  const std::size_t body = x.frames - x.frames % kLanes;
  for (std::size_t t = 0; t < body; t += kLanes) {
    __m256d zr = _mm256_setzero_pd();
    __m256d zi = _mm256_setzero_pd();
    for (std::size_t m = 0; m < x.channels; ++m) {
      const __m256d wr = _mm256_set1_pd(w[m].real());
      const __m256d wi = _mm256_set1_pd(w[m].imag());
      const __m256d xr = _mm256_loadu_pd(x.re + m * x.stride + t);
      const __m256d xi = _mm256_loadu_pd(x.im + m * x.stride + t);
      zr = _mm256_fmadd_pd(wr, xr, zr);
      zr = _mm256_fmadd_pd(wi, xi, zr);
      zi = _mm256_fmadd_pd(wr, xi, zi);
      zi = _mm256_fnmadd_pd(wi, xr, zi);
    }
    _mm256_storeu_pd(z_re + t, zr);
    _mm256_storeu_pd(z_im + t, zi);
  }
  if (body < x.frames) scalar::table.beamform(w, tail_of(x, body), z_re + body, z_im + body);
}

inline __m256d ipow(__m256d base, int power) {
  __m256d result = _mm256_set1_pd(1.0);
  while (power > 0) {
    if (power & 1) result = _mm256_mul_pd(result, base);
    base = _mm256_mul_pd(base, base);
    power >>= 1;
  }
  return result;
}

void posteriors(const double* q, const double* c, const double* d, std::size_t sources,
                std::size_t stride, std::size_t frames, int power, double* gamma) {
  const std::size_t body = frames - frames % kLanes;
  const __m256d zero = _mm256_setzero_pd();
  const __m256d inf = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  const __m256d max_finite = _mm256_set1_pd(std::numeric_limits<double>::max());
  for (std::size_t t = 0; t < body; t += kLanes) {
    __m256d q_min = inf;
    for (std::size_t k = 0; k < sources; ++k) {
      const __m256d active = _mm256_cmp_pd(_mm256_loadu_pd(d + k * stride + t), zero, _CMP_NEQ_UQ);
      const __m256d qk = _mm256_loadu_pd(q + k * stride + t);
      const __m256d smaller = _mm256_and_pd(active, _mm256_cmp_pd(qk, q_min, _CMP_LT_OQ));
      q_min = _mm256_blendv_pd(q_min, qk, smaller);
    }
    __m256d total = zero;
    for (std::size_t k = 0; k < sources; ++k) {
      const __m256d active = _mm256_cmp_pd(_mm256_loadu_pd(d + k * stride + t), zero, _CMP_NEQ_UQ);
      const __m256d qk = _mm256_loadu_pd(q + k * stride + t);
      const __m256d v = _mm256_mul_pd(_mm256_set1_pd(c[k]), ipow(_mm256_div_pd(q_min, qk), power));
      const __m256d masked = _mm256_blendv_pd(zero, v, active);
      _mm256_storeu_pd(gamma + k * stride + t, masked);
      total = _mm256_add_pd(total, masked);
    }
    // Lanes with total in (0, max] are normal; anything else takes the fallback.
    const __m256d ok = _mm256_and_pd(_mm256_cmp_pd(total, zero, _CMP_GT_OQ),
                                     _mm256_cmp_pd(total, max_finite, _CMP_LE_OQ));
    const __m256d inv = _mm256_div_pd(_mm256_set1_pd(1.0), total);
    for (std::size_t k = 0; k < sources; ++k) {
      double* g = gamma + k * stride + t;
      _mm256_storeu_pd(g, _mm256_mul_pd(_mm256_loadu_pd(g), inv));
    }
    const int mask = _mm256_movemask_pd(ok);
    if (mask != 0xF) {
      for (std::size_t lane = 0; lane < kLanes; ++lane) {
        if (mask & (1 << lane)) continue;
        scalar::table.posteriors(q + t + lane, c, d + t + lane, sources, stride, 1, power,
                                 gamma + t + lane);
      }
    }
  }
  if (body < frames) {
    scalar::table.posteriors(q + body, c, d + body, sources, stride, frames - body, power,
                             gamma + body);
  }
}

}  // namespace

const KernelTable table{"avx2", normalize, quadratic, weighted_outer, beamform, posteriors};

}  // namespace bogss::kernels::avx2
