#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "urank/kernels.hpp"
#include "urank/rng.hpp"

using namespace urank;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-3.0, 3.0);
  return v;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("scalar kernels match hand arithmetic") {
  const double x[] = {1.0, 2.0, 3.0};
  const double y[] = {4.0, 5.0, 6.0};
  CHECK(kernels::scalar::dot(x, y, 3) == doctest::Approx(32.0));
  CHECK(kernels::scalar::sum(x, 3) == doctest::Approx(6.0));

  double acc[] = {1.0, 1.0, 1.0};
  kernels::scalar::axpy(2.0, x, acc, 3);  // acc = 1 + 2x
  CHECK(acc[0] == doctest::Approx(3.0));
  CHECK(acc[1] == doctest::Approx(5.0));
  CHECK(acc[2] == doctest::Approx(7.0));

  kernels::scalar::scale(0.5, acc, 3);
  CHECK(acc[0] == doctest::Approx(1.5));
  CHECK(acc[2] == doctest::Approx(3.5));
}

TEST_CASE("zero-length inputs are harmless") {
  CHECK(kernels::scalar::dot(nullptr, nullptr, 0) == 0.0);
  CHECK(kernels::scalar::sum(nullptr, 0) == 0.0);
  kernels::scalar::axpy(2.0, nullptr, nullptr, 0);
  kernels::scalar::scale(2.0, nullptr, 0);
  CHECK(kernels::dot(nullptr, nullptr, 0) == 0.0);
}

#if URANK_X86_64
TEST_CASE("avx2 kernels agree with scalar on every tail length") {
  if (!kernels::backend_available(kernels::Backend::avx2)) return;
  Rng rng(99);
  for (std::size_t n = 1; n <= 37; ++n) {
    const auto x = random_vec(rng, n);
    const auto y = random_vec(rng, n);

    const double ds = kernels::scalar::dot(x.data(), y.data(), n);
    const double dv = kernels::avx2::dot(x.data(), y.data(), n);
    CHECK(dv == doctest::Approx(ds).epsilon(1e-12));

    const double ss = kernels::scalar::sum(x.data(), n);
    const double sv = kernels::avx2::sum(x.data(), n);
    CHECK(sv == doctest::Approx(ss).epsilon(1e-12));

    auto a = y, b = y;
    kernels::scalar::axpy(1.7, x.data(), a.data(), n);
    kernels::avx2::axpy(1.7, x.data(), b.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-12));

    auto c = x, d = x;
    kernels::scalar::scale(-0.3, c.data(), n);
    kernels::avx2::scale(-0.3, d.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(d[i] == c[i]);  // one multiply, exact
  }
}
#endif

TEST_CASE("backend selection round-trips and rejects unavailable targets") {
  const auto original = kernels::active_backend();
  CHECK(kernels::backend_available(kernels::Backend::scalar));
  CHECK(kernels::backend_name(kernels::Backend::scalar) == "scalar");
  CHECK(kernels::backend_name(kernels::Backend::avx2) == "avx2");

  kernels::set_backend(kernels::Backend::scalar);
  CHECK(kernels::active_backend() == kernels::Backend::scalar);
  const double x[] = {1.0, 2.0};
  CHECK(kernels::dot(x, x, 2) == doctest::Approx(5.0));

  if (kernels::backend_available(kernels::Backend::avx2)) {
    kernels::set_backend(kernels::Backend::avx2);
    CHECK(kernels::active_backend() == kernels::Backend::avx2);
    CHECK(kernels::dot(x, x, 2) == doctest::Approx(5.0));
  } else {
    CHECK_THROWS_AS(kernels::set_backend(kernels::Backend::avx2), std::invalid_argument);
  }
  kernels::set_backend(original);
}

}  // TEST_SUITE
