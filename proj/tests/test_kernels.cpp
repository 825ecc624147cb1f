#include <doctest.h>

#include <cmath>
#include <vector>

#include "bogss/kernels.hpp"
#include "test_util.hpp"

using namespace bogss;
using namespace bogss::test;

namespace {

struct Planes {
  std::size_t channels, stride, frames;
  std::vector<double> re, im;

  Planes(Rng& rng, std::size_t m, std::size_t t)
      : channels(m), stride(t + 3), frames(t), re(m * (t + 3)), im(m * (t + 3)) {
    for (std::size_t i = 0; i < re.size(); ++i) {
      const cplx v = randn_c(rng);
      re[i] = v.real();
      im[i] = v.imag();
    }
  }
  kernels::ChannelPlanes view() const { return {re.data(), im.data(), channels, stride, frames}; }
  cplx at(std::size_t m, std::size_t t) const { return {re[m * stride + t], im[m * stride + t]}; }
};

std::vector<const kernels::KernelTable*> tables() {
  std::vector<const kernels::KernelTable*> out{&kernels::table(kernels::Isa::scalar)};
  if (kernels::isa_supported(kernels::Isa::avx2)) out.push_back(&kernels::table(kernels::Isa::avx2));
  return out;
}

constexpr double kTol = 1e-11;

}  // namespace

TEST_CASE("normalize matches per-frame division and maps zeros to e0") {
  Rng rng(1);
  for (std::size_t m = 1; m <= 6; ++m)
    for (std::size_t t : {1u, 3u, 4u, 5u, 17u, 32u}) {
      Planes x(rng, m, t);
      for (std::size_t c = 0; c < m; ++c) x.re[c * x.stride + 0] = x.im[c * x.stride + 0] = 0.0;
      for (const auto* tab : tables()) {
        std::vector<double> ore(m * x.stride), oim(m * x.stride);
        tab->normalize(x.view(), {ore.data(), oim.data(), m, x.stride, t});
        for (std::size_t f = 0; f < t; ++f) {
          double n2 = 0.0;
          for (std::size_t c = 0; c < m; ++c) n2 += std::norm(x.at(c, f));
          for (std::size_t c = 0; c < m; ++c) {
            const cplx got{ore[c * x.stride + f], oim[c * x.stride + f]};
            const cplx want = n2 > 0.0 ? x.at(c, f) / std::sqrt(n2) : cplx(c == 0 ? 1.0 : 0.0);
            CHECK(std::abs(got - want) < kTol);
          }
        }
      }
    }
}

TEST_CASE("quadratic form matches naive evaluation") {
  Rng rng(2);
  for (std::size_t m = 1; m <= 6; ++m)
    for (std::size_t t : {1u, 2u, 4u, 7u, 33u}) {
      Planes x(rng, m, t);
      const auto a = random_hpd(rng, m);
      for (const auto* tab : tables()) {
        std::vector<double> q(t);
        tab->quadratic(a.data(), x.view(), q.data());
        for (std::size_t f = 0; f < t; ++f) {
          cplx want = 0.0;
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) want += std::conj(x.at(i, f)) * a[i * m + j] * x.at(j, f);
          CHECK(std::abs(q[f] - want.real()) < kTol * (1.0 + std::abs(want)));
        }
      }
    }
}

TEST_CASE("weighted outer product matches naive sum and is Hermitian") {
  Rng rng(3);
  for (std::size_t m = 1; m <= 6; ++m)
    for (std::size_t t : {1u, 4u, 9u, 40u}) {
      Planes x(rng, m, t);
      std::vector<double> w(t);
      for (auto& v : w) v = uniform(rng, 0.0, 1.0);
      std::vector<cplx> want(m * m, cplx{});
      for (std::size_t f = 0; f < t; ++f)
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < m; ++j) want[i * m + j] += w[f] * x.at(i, f) * std::conj(x.at(j, f));
      for (const auto* tab : tables()) {
        std::vector<cplx> s(m * m);
        tab->weighted_outer(w.data(), x.view(), s.data());
        CHECK(max_abs_diff(s, want) < kTol * static_cast<double>(t));
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < m; ++j) CHECK(s[i * m + j] == std::conj(s[j * m + i]));
      }
    }
}

TEST_CASE("beamform matches naive inner product") {
  Rng rng(4);
  for (std::size_t m = 1; m <= 6; ++m)
    for (std::size_t t : {1u, 4u, 6u, 31u}) {
      Planes x(rng, m, t);
      const auto w = random_vector(rng, m);
      for (const auto* tab : tables()) {
        std::vector<double> zr(t), zi(t);
        tab->beamform(w.data(), x.view(), zr.data(), zi.data());
        for (std::size_t f = 0; f < t; ++f) {
          cplx want = 0.0;
          for (std::size_t c = 0; c < m; ++c) want += std::conj(w[c]) * x.at(c, f);
          CHECK(std::abs(cplx(zr[f], zi[f]) - want) < 1e-12 * (1.0 + std::abs(want)));
        }
      }
    }
}

TEST_CASE("posteriors match direct evaluation with fallback") {
  Rng rng(5);
  for (int power : {1, 2, 4, 8})
    for (std::size_t k = 1; k <= 4; ++k)
      for (std::size_t t : {1u, 5u, 16u, 23u}) {
        const std::size_t stride = t + 2;
        std::vector<double> q(k * stride), d(k * stride, 0.0), c(k);
        for (auto& v : q) v = uniform(rng, 0.05, 3.0);
        for (auto& v : c) v = uniform(rng, 0.1, 2.0);
        for (std::size_t s = 0; s < k; ++s)
          for (std::size_t f = 0; f < t; ++f) d[s * stride + f] = (s == 0 || uniform(rng, 0, 1) < 0.6) ? 1.0 : 0.0;
        for (const auto* tab : tables()) {
          std::vector<double> g(k * stride, -1.0);
          tab->posteriors(q.data(), c.data(), d.data(), k, stride, t, power, g.data());
          for (std::size_t f = 0; f < t; ++f) {
            double z = 0.0;
            std::vector<double> u(k);
            for (std::size_t s = 0; s < k; ++s) {
              u[s] = c[s] * d[s * stride + f] * std::pow(q[s * stride + f], -power);
              z += u[s];
            }
            for (std::size_t s = 0; s < k; ++s) CHECK(std::abs(g[s * stride + f] - u[s] / z) < 1e-12);
          }
        }
      }
}

TEST_CASE("posteriors survive powers that overflow a direct evaluation") {
  const std::size_t t = 3, k = 2;
  std::vector<double> q{1e-30, 1e-29, 1e-30, 1e-31, 1e-30, 1e-30}, c{1.0, 1.0}, d(6, 1.0);
  for (const auto* tab : tables()) {
    std::vector<double> g(k * t);
    tab->posteriors(q.data(), c.data(), d.data(), k, t, t, 16, g.data());
    for (std::size_t f = 0; f < t; ++f) {
      CHECK(std::isfinite(g[f]));
      CHECK(std::abs(g[f] + g[t + f] - 1.0) < 1e-12);
    }
    CHECK(g[0] == doctest::Approx(1.0 / (1.0 + 1e16)).epsilon(1e-9));
    CHECK(g[t] == doctest::Approx(1.0));
    CHECK(g[2] == doctest::Approx(0.5));
  }
}

TEST_CASE("AVX2 and scalar tables agree on the same inputs") {
  if (!kernels::isa_supported(kernels::Isa::avx2)) return;
  const auto& s = kernels::table(kernels::Isa::scalar);
  const auto& v = kernels::table(kernels::Isa::avx2);
  CHECK(v.name == "avx2");
  Rng rng(6);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t m = uniform_index(rng, 1, 8), t = uniform_index(rng, 1, 70);
    Planes x(rng, m, t);
    const auto a = random_hpd(rng, m);
    std::vector<double> q1(t), q2(t);
    s.quadratic(a.data(), x.view(), q1.data());
    v.quadratic(a.data(), x.view(), q2.data());
    for (std::size_t f = 0; f < t; ++f) CHECK(std::abs(q1[f] - q2[f]) < 1e-11 * (1.0 + std::abs(q1[f])));
  }
}

TEST_CASE("ISA can be pinned and restored") {
  const auto before = kernels::active_isa();
  kernels::set_isa(kernels::Isa::scalar);
  CHECK(kernels::active().name == "scalar");
  if (kernels::isa_supported(kernels::Isa::avx2)) {
    kernels::set_isa(kernels::Isa::avx2);
    CHECK(kernels::active().name == "avx2");
  } else {
    CHECK_THROWS_AS(kernels::set_isa(kernels::Isa::avx2), Error);
  }
  kernels::set_isa(before);
}
