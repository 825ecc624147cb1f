#include <doctest.h>

#include "bogss/linalg.hpp"
#include "test_util.hpp"

using namespace bogss;
using namespace bogss::test;

TEST_CASE("cholesky reconstructs and matches Eigen") {
  Rng rng(10);
  for (std::size_t n = 1; n <= 8; ++n) {
    const auto a = random_hpd(rng, n);
    std::vector<cplx> l(n * n);
    REQUIRE(linalg::cholesky(a, n, l));
    std::vector<cplx> rec(n * n, cplx{});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) rec[i * n + j] += l[i * n + k] * std::conj(l[j * n + k]);
    CHECK(max_abs_diff(rec, a) < 1e-10);

    const EMat ea = to_eigen(a, n);
    const double logdet = std::log(ea.determinant().real());
    CHECK(linalg::log_det_cholesky(l, n) == doctest::Approx(logdet).epsilon(1e-10));

    std::vector<cplx> inv(n * n);
    linalg::inverse_cholesky(l, n, inv);
    CHECK(max_abs_diff(inv, from_eigen(ea.inverse())) < 1e-9);
    CHECK(linalg::hermitian_error(inv, n) == 0.0);
  }
}

TEST_CASE("cholesky rejects indefinite matrices") {
  std::vector<cplx> a{1.0, 0.0, 0.0, -1.0}, l(4);
  CHECK_FALSE(linalg::cholesky(a, 2, l));
  std::vector<cplx> z(4, cplx{});
  CHECK_FALSE(linalg::cholesky(z, 2, l));
}

TEST_CASE("solve matches Eigen for several right-hand sides") {
  Rng rng(11);
  for (std::size_t n = 1; n <= 6; ++n) {
    const auto a = random_hpd(rng, n);
    const std::size_t cols = 3;
    const auto b = random_vector(rng, n * cols);
    std::vector<cplx> l(n * n), x(n * cols);
    REQUIRE(linalg::cholesky(a, n, l));
    linalg::solve_cholesky(l, n, b, cols, x);
    Eigen::MatrixXcd eb(n, cols);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < cols; ++c) eb(i, c) = b[i * cols + c];
    const Eigen::MatrixXcd ex = to_eigen(a, n).lu().solve(eb);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < cols; ++c) CHECK(std::abs(x[i * cols + c] - ex(i, c)) < 1e-9);
  }
}

TEST_CASE("regularization, trace, hermitize, matvec, quadratic form") {
  std::vector<cplx> a{2.0, {1.0, 1.0}, {1.0, -3.0}, 4.0};
  CHECK(linalg::trace(a, 2) == cplx(6.0, 0.0));
  CHECK(linalg::hermitian_error(a, 2) == doctest::Approx(2.0));
  linalg::hermitize(a, 2);
  CHECK(a[1] == cplx(1.0, 2.0));
  CHECK(a[2] == cplx(1.0, -2.0));

  const auto r = linalg::regularized(a, 2, 0.5);
  CHECK(r[0] == cplx(2.0 + 1.5, 0.0));
  CHECK(r[3] == cplx(4.0 + 1.5, 0.0));
  CHECK(r[1] == a[1]);
  const std::vector<cplx> zero(4, cplx{});
  const auto rz = linalg::regularized(zero, 2, 0.25);
  CHECK(rz[0] == cplx(0.25));
  CHECK(rz[3] == cplx(0.25));

  const std::vector<cplx> x{{1.0, 1.0}, {0.0, 2.0}};
  std::vector<cplx> y(2);
  linalg::matvec(a, 2, x, y);
  CHECK(std::abs(y[0] - (a[0] * x[0] + a[1] * x[1])) < 1e-15);
  const cplx want = std::conj(x[0]) * y[0] + std::conj(x[1]) * y[1];
  CHECK(linalg::quadratic_form(a, 2, x) == doctest::Approx(want.real()));
  CHECK(linalg::identity(3)[4] == cplx(1.0));
}
