#include <cmath>
#include <limits>

#include "bogss/kernels.hpp"

namespace bogss::kernels::scalar {
namespace {

void normalize(ChannelPlanes x, MutablePlanes out) {
  const std::size_t m_count = x.channels;
  for (std::size_t t = 0; t < x.frames; ++t) {
    double energy = 0.0;
    for (std::size_t m = 0; m < m_count; ++m) {
      const double r = x.re[m * x.stride + t];
      const double i = x.im[m * x.stride + t];
      energy += r * r + i * i;
    }
    if (energy > 0.0) {
      const double inv = 1.0 / std::sqrt(energy);
      for (std::size_t m = 0; m < m_count; ++m) {
        out.re[m * out.stride + t] = x.re[m * x.stride + t] * inv;
        out.im[m * out.stride + t] = x.im[m * x.stride + t] * inv;
      }
    } else {
      for (std::size_t m = 0; m < m_count; ++m) {
        out.re[m * out.stride + t] = m == 0 ? 1.0 : 0.0;
        out.im[m * out.stride + t] = 0.0;
      }
    }
  }
}

void quadratic(const cplx* a, ChannelPlanes x, double* q) {
  const std::size_t n = x.channels;
  for (std::size_t t = 0; t < x.frames; ++t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ri = x.re[i * x.stride + t];
      const double ii = x.im[i * x.stride + t];
      acc += a[i * n + i].real() * (ri * ri + ii * ii);
      double cross = 0.0;
      for (std::size_t j = i + 1; j < n; ++j) {
        const double rj = x.re[j * x.stride + t];
        const double ij = x.im[j * x.stride + t];
        // conj(x_i) * x_j
        const double pr = ri * rj + ii * ij;
        const double pi = ri * ij - ii * rj;
        cross += a[i * n + j].real() * pr - a[i * n + j].imag() * pi;
      }
      acc += 2.0 * cross;
    }
    q[t] = acc;
  }
}

void weighted_outer(const double* w, ChannelPlanes x, cplx* s) {
  const std::size_t n = x.channels;
  for (std::size_t i = 0; i < n; ++i) {
    const double* ri = x.re + i * x.stride;
    const double* ii = x.im + i * x.stride;
    for (std::size_t j = i; j < n; ++j) {
      const double* rj = x.re + j * x.stride;
      const double* ij = x.im + j * x.stride;
      double sr = 0.0, si = 0.0;
      for (std::size_t t = 0; t < x.frames; ++t) {
        // x_i * conj(x_j)
        sr += w[t] * (ri[t] * rj[t] + ii[t] * ij[t]);
        si += w[t] * (ii[t] * rj[t] - ri[t] * ij[t]);
      }
      if (i == j) {
        s[i * n + i] = {sr, 0.0};
      } else {
        s[i * n + j] = {sr, si};
        s[j * n + i] = {sr, -si};
      }
    }
  }
}

void beamform(const cplx* w, ChannelPlanes x, double* z_re, double* z_im) {
  for (std::size_t t = 0; t < x.frames; ++t) {
    double zr = 0.0, zi = 0.0;
    for (std::size_t m = 0; m < x.channels; ++m) {
      const double wr = w[m].real(), wi = w[m].imag();
      const double xr = x.re[m * x.stride + t], xi = x.im[m * x.stride + t];
      zr += wr * xr + wi * xi;
      zi += wr * xi - wi * xr;
    }
    z_re[t] = zr;
    z_im[t] = zi;
  }
}

double ipow(double base, int power) {
  double result = 1.0;
  while (power > 0) {
    if (power & 1) result *= base;
    base *= base;
    power >>= 1;
  }
  return result;
}

void posteriors(const double* q, const double* c, const double* d, std::size_t sources,
                std::size_t stride, std::size_t frames, int power, double* gamma) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < frames; ++t) {
    double q_min = kInf;
    for (std::size_t k = 0; k < sources; ++k) {
      if (d[k * stride + t] != 0.0 && q[k * stride + t] < q_min) q_min = q[k * stride + t];
    }
    double total = 0.0;
    for (std::size_t k = 0; k < sources; ++k) {
      double v = 0.0;
      if (d[k * stride + t] != 0.0) v = c[k] * ipow(q_min / q[k * stride + t], power);
      gamma[k * stride + t] = v;
      total += v;
    }
    if (total > 0.0 && std::isfinite(total)) {
      const double inv = 1.0 / total;
      for (std::size_t k = 0; k < sources; ++k) gamma[k * stride + t] *= inv;
    } else {
      double active = 0.0;
      for (std::size_t k = 0; k < sources; ++k) active += d[k * stride + t];
      const double inv = active > 0.0 ? 1.0 / active : 0.0;
      for (std::size_t k = 0; k < sources; ++k) gamma[k * stride + t] = d[k * stride + t] * inv;
    }
  }
}

}  // namespace

const KernelTable table{"scalar", normalize, quadratic, weighted_outer, beamform, posteriors};

}  // namespace bogss::kernels::scalar
