#pragma once

#include <cstddef>

namespace feddr::kernels::detail {

double dot_scalar(const double* a, const double* b, std::size_t n);
double sq_dist_scalar(const double* a, const double* b, std::size_t n);
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n);
void axpby_scalar(double alpha, const double* x, double beta, double* y, std::size_t n);
void soft_threshold_scalar(const double* in, double t, double* out, std::size_t n);

#if defined(FEDDR_HAVE_AVX2)
double dot_avx2(const double* a, const double* b, std::size_t n);
double sq_dist_avx2(const double* a, const double* b, std::size_t n);
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n);
void axpby_avx2(double alpha, const double* x, double beta, double* y, std::size_t n);
void soft_threshold_avx2(const double* in, double t, double* out, std::size_t n);
#endif

}  // namespace feddr::kernels::detail
