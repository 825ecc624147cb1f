#include "bogss/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace bogss {

FreqPlanes to_planes(const CTensor3& tfm) {
  FreqPlanes out(tfm.dim1(), tfm.dim2(), tfm.dim0());
  for (std::size_t t = 0; t < tfm.dim0(); ++t)
    for (std::size_t f = 0; f < tfm.dim1(); ++f)
      for (std::size_t m = 0; m < tfm.dim2(); ++m) out.set(t, f, m, tfm(t, f, m));
  return out;
}

CTensor3 from_planes(const FreqPlanes& planes) {
  CTensor3 out(planes.frames(), planes.freqs(), planes.channels());
  for (std::size_t t = 0; t < planes.frames(); ++t)
    for (std::size_t f = 0; f < planes.freqs(); ++f)
      for (std::size_t m = 0; m < planes.channels(); ++m) out(t, f, m) = planes.at(t, f, m);
  return out;
}

}  // namespace bogss

namespace bogss::linalg {

CMatrix identity(std::size_t n) {
  CMatrix out(n * n);
  for (std::size_t i = 0; i < n; ++i) out[i * n + i] = 1.0;
  return out;
}

cplx trace(std::span<const cplx> a, std::size_t n) {
  cplx s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i * n + i];
  return s;
}

void hermitize(std::span<cplx> a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    a[i * n + i] = a[i * n + i].real();
    for (std::size_t j = i + 1; j < n; ++j) {
      const cplx avg = 0.5 * (a[i * n + j] + std::conj(a[j * n + i]));
      a[i * n + j] = avg;
      a[j * n + i] = std::conj(avg);
    }
  }
}

double hermitian_error(std::span<const cplx> a, std::size_t n) {
  double err = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      err = std::max(err, std::abs(a[i * n + j] - std::conj(a[j * n + i])));
  return err;
}

CMatrix regularized(std::span<const cplx> a, std::size_t n, double eps) {
  CMatrix out(a.begin(), a.end());
  const double tr = trace(a, n).real();
  const double load = tr != 0.0 ? eps * tr / static_cast<double>(n) : eps;
  for (std::size_t i = 0; i < n; ++i) out[i * n + i] += load;
  return out;
}

bool cholesky(std::span<const cplx> a, std::size_t n, std::span<cplx> l) {
  std::fill(l.begin(), l.begin() + n * n, cplx{});
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a[j * n + j].real();
    for (std::size_t k = 0; k < j; ++k) diag -= std::norm(l[j * n + k]);
    if (!(diag > 0.0) || !std::isfinite(diag)) return false;
    const double ljj = std::sqrt(diag);
    l[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      cplx s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * std::conj(l[j * n + k]);
      l[i * n + j] = s / ljj;
    }
  }
  return true;
}

double log_det_cholesky(std::span<const cplx> l, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::log(l[i * n + i].real());
  return 2.0 * s;
}

void solve_cholesky(std::span<const cplx> l, std::size_t n, std::span<const cplx> b,
                    std::size_t cols, std::span<cplx> x) {
  std::copy(b.begin(), b.begin() + n * cols, x.begin());
  for (std::size_t c = 0; c < cols; ++c) {
    // l y = b
    for (std::size_t i = 0; i < n; ++i) {
      cplx s = x[i * cols + c];
      for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * x[k * cols + c];
      x[i * cols + c] = s / l[i * n + i].real();
    }
    // l^H x = y
    for (std::size_t ii = n; ii-- > 0;) {
      cplx s = x[ii * cols + c];
      for (std::size_t k = ii + 1; k < n; ++k) s -= std::conj(l[k * n + ii]) * x[k * cols + c];
      x[ii * cols + c] = s / l[ii * n + ii].real();
    }
  }
}

void inverse_cholesky(std::span<const cplx> l, std::size_t n, std::span<cplx> out) {
  const CMatrix eye = identity(n);
  solve_cholesky(l, n, eye, n, out);
  hermitize(out.first(n * n), n);
}

void matvec(std::span<const cplx> a, std::size_t n, std::span<const cplx> x, std::span<cplx> y) {
  for (std::size_t i = 0; i < n; ++i) {
    cplx s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += a[i * n + j] * x[j];
    y[i] = s;
  }
}

double quadratic_form(std::span<const cplx> a, std::size_t n, std::span<const cplx> x) {
  cplx s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cplx row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += a[i * n + j] * x[j];
    s += std::conj(x[i]) * row;
  }
  return s.real();
}

}  // namespace bogss::linalg
