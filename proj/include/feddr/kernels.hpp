#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Dense vector kernels. Each operation has a scalar reference and an AVX2
// variant; the public entry points dispatch at runtime. Elementwise kernels
// are bit-identical across variants, reductions agree to rounding.

namespace feddr::kernels {

enum class Isa { scalar, avx2 };

struct Table {
  double (*dot)(const double*, const double*, std::size_t);
  double (*sq_dist)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*axpby)(double, const double*, double, double*, std::size_t);
  void (*soft_threshold)(const double*, double, double*, std::size_t);
};

const Table& scalar_table() noexcept;
// Null when the build or the CPU lacks AVX2.
const Table* avx2_table() noexcept;

Isa active_isa() noexcept;
std::string_view isa_name(Isa isa) noexcept;
// Overrides the CPU probe; returns false if the requested ISA is unavailable.
bool force_isa(Isa isa) noexcept;

double dot(std::span<const double> a, std::span<const double> b);
double sq_norm(std::span<const double> a);
double sq_dist(std::span<const double> a, std::span<const double> b);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
// y = alpha * x + beta * y
void axpby(double alpha, std::span<const double> x, double beta, std::span<double> y);
// out_j = sign(in_j) * max(|in_j| - t, 0)
void soft_threshold(std::span<const double> in, double t, std::span<double> out);

}  // namespace feddr::kernels
