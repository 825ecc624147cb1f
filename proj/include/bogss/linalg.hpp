#pragma once

// Small dense complex matrices (M x M, M at most a few dozen) stored
// row-major in flat spans. Only what the mixture model and the beamformer
// need: Hermitian Cholesky, inverse, solves, regularization.

#include <cstddef>
#include <span>
#include <vector>

#include "bogss/types.hpp"

namespace bogss::linalg {

using CMatrix = std::vector<cplx>;

CMatrix identity(std::size_t n);
cplx trace(std::span<const cplx> a, std::size_t n);

/// a <- (a + a^H) / 2.
void hermitize(std::span<cplx> a, std::size_t n);

/// Largest |a_ij - conj(a_ji)|.
double hermitian_error(std::span<const cplx> a, std::size_t n);

/// Copy of a with eps * trace(a)/n * I added (eps * I when the trace is zero).
CMatrix regularized(std::span<const cplx> a, std::size_t n, double eps);

/// Lower-triangular l with a = l l^H. Returns false if a is not numerically
/// positive definite.
bool cholesky(std::span<const cplx> a, std::size_t n, std::span<cplx> l);

/// log det(a) for a = l l^H.
double log_det_cholesky(std::span<const cplx> l, std::size_t n);

/// a^{-1} from its Cholesky factor; the result is exactly Hermitian.
void inverse_cholesky(std::span<const cplx> l, std::size_t n, std::span<cplx> out);

/// Solves a x = b for `cols` right-hand sides (b row-major n x cols).
void solve_cholesky(std::span<const cplx> l, std::size_t n, std::span<const cplx> b,
                    std::size_t cols, std::span<cplx> x);

/// y = a x.
void matvec(std::span<const cplx> a, std::size_t n, std::span<const cplx> x, std::span<cplx> y);

/// Re(x^H a x).
double quadratic_form(std::span<const cplx> a, std::size_t n, std::span<const cplx> x);

}  // namespace bogss::linalg
