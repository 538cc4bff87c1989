#pragma once

#include <cstddef>

namespace conley::kernels {

// Dense double-precision primitives used by the flow integrator, field
// evaluation, and sampling loops.  Two variants exist: a scalar reference
// and an AVX2 implementation.  Both follow the same 4-lane accumulation
// order, so their results are bit-identical; tests assert this, and the
// whole pipeline stays deterministic no matter which variant is selected.
struct Ops {
  // sum_i a[i]*b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // sum_i x[i]^2
  double (*sum_sq)(const double* x, std::size_t n);
  // y[i] += a*x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // out[i] = x[i] + a*k[i]
  void (*axpby_to)(double* out, const double* x, double a, const double* k,
                   std::size_t n);
  // x[i] *= a
  void (*scale)(double a, double* x, std::size_t n);
  // y = A*x, A row-major rows x cols
  void (*matvec)(const double* A, const double* x, double* y,
                 std::size_t rows, std::size_t cols);
  // out[i] = y[i] + (h/6)*((k1[i] + (k2[i]+k2[i])) + ((k3[i]+k3[i]) + k4[i]))
  void (*rk4_combine)(double* out, const double* y, const double* k1,
                      const double* k2, const double* k3, const double* k4,
                      double h, std::size_t n);
  const char* name;
};

const Ops& scalar_ops();
const Ops& avx2_ops();  // falls back to scalar_ops() off x86-64
bool avx2_supported();

// Variant selected once per process: CONLEY_KERNELS=scalar|avx2|auto
// (default auto: AVX2 when the CPU supports it).
const Ops& ops();

}  // namespace conley::kernels
