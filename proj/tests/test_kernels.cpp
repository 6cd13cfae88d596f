#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <random>
#include <vector>

#include "feddr/kernels.hpp"

using namespace feddr;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 3.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::memcmp(&a[i], &b[i], sizeof(double)) != 0) return false;
  return true;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("FEDDR_ISA environment variable selects the scalar path") {
  const char* env = std::getenv("FEDDR_ISA");
  if (env && std::strcmp(env, "scalar") == 0) CHECK(kernels::active_isa() == kernels::Isa::scalar);
  else if (kernels::avx2_table()) CHECK(kernels::active_isa() == kernels::Isa::avx2);
}

TEST_CASE("scalar table matches naive loops") {
  const kernels::Table& s = kernels::scalar_table();
  std::mt19937_64 rng(1);
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 16u, 33u}) {
    auto a = random_vec(n, rng), b = random_vec(n, rng);
    double dot = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dot += a[i] * b[i];
      sq += (a[i] - b[i]) * (a[i] - b[i]);
    }
    CHECK(s.dot(a.data(), b.data(), n) == doctest::Approx(dot).epsilon(1e-13));
    CHECK(s.sq_dist(a.data(), b.data(), n) == doctest::Approx(sq).epsilon(1e-13));
  }
}

TEST_CASE("avx2 elementwise kernels are bit-identical to scalar") {
  const kernels::Table* v = kernels::avx2_table();
  if (!v) {
    MESSAGE("AVX2 unavailable; equivalence not exercised");
    return;
  }
  const kernels::Table& s = kernels::scalar_table();
  std::mt19937_64 rng(2);
  for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 8u, 13u, 64u, 1001u}) {
    auto x = random_vec(n, rng), y0 = random_vec(n, rng);
    auto y1 = y0, y2 = y0;
    s.axpy(0.37, x.data(), y1.data(), n);
    v->axpy(0.37, x.data(), y2.data(), n);
    CHECK(same_bits(y1, y2));
    y1 = y0;
    y2 = y0;
    s.axpby(-1.5, x.data(), 0.25, y1.data(), n);
    v->axpby(-1.5, x.data(), 0.25, y2.data(), n);
    CHECK(same_bits(y1, y2));
    std::vector<double> o1(n), o2(n);
    s.soft_threshold(x.data(), 1.1, o1.data(), n);
    v->soft_threshold(x.data(), 1.1, o2.data(), n);
    CHECK(same_bits(o1, o2));
  }
}

TEST_CASE("avx2 reductions agree with scalar to rounding") {
  const kernels::Table* v = kernels::avx2_table();
  if (!v) return;
  const kernels::Table& s = kernels::scalar_table();
  std::mt19937_64 rng(3);
  for (std::size_t n : {1u, 3u, 4u, 9u, 100u, 4097u}) {
    auto a = random_vec(n, rng), b = random_vec(n, rng);
    double mag = 0.0;
    for (std::size_t i = 0; i < n; ++i) mag += std::fabs(a[i] * b[i]);
    CHECK(std::fabs(s.dot(a.data(), b.data(), n) - v->dot(a.data(), b.data(), n)) <=
          1e-14 * mag + 1e-300);
    const double sq = s.sq_dist(a.data(), b.data(), n);
    CHECK(v->sq_dist(a.data(), b.data(), n) == doctest::Approx(sq).epsilon(1e-13));
  }
}

TEST_CASE("soft threshold handles signs and zero") {
  std::vector<double> in{2.0, -0.5, 0.0, -3.0, 1.0}, out(5);
  kernels::soft_threshold(in, 1.0, out);
  CHECK(out == std::vector<double>{1.0, 0.0, 0.0, -2.0, 0.0});
}

TEST_CASE("isa can be forced to scalar") {
  const kernels::Isa before = kernels::active_isa();
  CHECK(kernels::force_isa(kernels::Isa::scalar));
  CHECK(kernels::active_isa() == kernels::Isa::scalar);
  CHECK(kernels::isa_name(kernels::Isa::scalar) == "scalar");
  if (kernels::avx2_table()) CHECK(kernels::force_isa(kernels::Isa::avx2));
  else CHECK_FALSE(kernels::force_isa(kernels::Isa::avx2));
  kernels::force_isa(before);
}

}
