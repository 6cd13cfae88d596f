#include "feddr/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "feddr/errors.hpp"
#include "kernels_impl.hpp"

namespace feddr::kernels {

namespace {

constexpr Table kScalar{detail::dot_scalar, detail::sq_dist_scalar, detail::axpy_scalar,
                        detail::axpby_scalar, detail::soft_threshold_scalar};

#if defined(FEDDR_HAVE_AVX2)
constexpr Table kAvx2{detail::dot_avx2, detail::sq_dist_avx2, detail::axpy_avx2,
                      detail::axpby_avx2, detail::soft_threshold_avx2};
#endif

bool cpu_has_avx2() noexcept {
#if defined(FEDDR_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Isa probe() noexcept {
  // FEDDR_ISA=scalar pins the reference path.
  if (const char* env = std::getenv("FEDDR_ISA"); env && std::strcmp(env, "scalar") == 0)
    return Isa::scalar;
  return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() noexcept {
  static std::atomic<Isa> isa{probe()};
  return isa;
}

const Table& table() noexcept {
  const Table* t = current().load(std::memory_order_relaxed) == Isa::avx2 ? avx2_table() : nullptr;
  return t ? *t : kScalar;
}

void require_same(std::size_t a, std::size_t b) {
  if (a != b) throw DimensionMismatch(a, b);
}

}  // namespace

const Table& scalar_table() noexcept { return kScalar; }

const Table* avx2_table() noexcept {
#if defined(FEDDR_HAVE_AVX2)
  return cpu_has_avx2() ? &kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

Isa active_isa() noexcept { return current().load(std::memory_order_relaxed); }

std::string_view isa_name(Isa isa) noexcept { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool force_isa(Isa isa) noexcept {
  if (isa == Isa::avx2 && !avx2_table()) return false;
  current().store(isa, std::memory_order_relaxed);
  return true;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same(a.size(), b.size());
  return table().dot(a.data(), b.data(), a.size());
}

double sq_norm(std::span<const double> a) { return table().dot(a.data(), a.data(), a.size()); }

double sq_dist(std::span<const double> a, std::span<const double> b) {
  require_same(a.size(), b.size());
  return table().sq_dist(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require_same(x.size(), y.size());
  table().axpy(alpha, x.data(), y.data(), x.size());
}

void axpby(double alpha, std::span<const double> x, double beta, std::span<double> y) {
  require_same(x.size(), y.size());
  table().axpby(alpha, x.data(), beta, y.data(), x.size());
}

void soft_threshold(std::span<const double> in, double t, std::span<double> out) {
  require_same(in.size(), out.size());
  table().soft_threshold(in.data(), t, out.data(), in.size());
}

}  // namespace feddr::kernels
