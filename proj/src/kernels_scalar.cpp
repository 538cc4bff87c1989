#include "conley/kernels.hpp"

// Reference kernels.  The reductions keep four independent accumulators,
// lane j holding elements with index = j mod 4, and combine them as
// (s0+s1)+(s2+s3) before the remainder loop -- the exact order the AVX2
// variant uses, so both produce the same bits.

namespace conley::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  double total = (s0 + s1) + (s2 + s3);
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

double sum_sq_scalar(const double* x, std::size_t n) {
  return dot_scalar(x, x, n);
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void axpby_to_scalar(double* out, const double* x, double a, const double* k,
                     std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + a * k[i];
}

void scale_scalar(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void matvec_scalar(const double* A, const double* x, double* y,
                   std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(A + r * cols, x, cols);
}

void rk4_combine_scalar(double* out, const double* y, const double* k1,
                        const double* k2, const double* k3, const double* k4,
                        double h, std::size_t n) {
  const double h6 = h / 6.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (k1[i] + (k2[i] + k2[i])) + ((k3[i] + k3[i]) + k4[i]);
    out[i] = y[i] + h6 * t;
  }
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops = {dot_scalar,    sum_sq_scalar,      axpy_scalar,
                          axpby_to_scalar, scale_scalar,     matvec_scalar,
                          rk4_combine_scalar, "scalar"};
  return ops;
}

}  // namespace conley::kernels
