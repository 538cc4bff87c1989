#include "conley/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define CONLEY_HAVE_AVX2_TU 1
#include <immintrin.h>
#endif

namespace conley::kernels {

#if CONLEY_HAVE_AVX2_TU
namespace {

// Vector lane j accumulates elements with index = j mod 4; the horizontal
// combine is (s0+s1)+(s2+s3).  Compiled with -mno-fma (and the project-wide
// -ffp-contract=off) so multiplies and adds round separately, exactly like
// the scalar reference.

inline double hsum(__m256d v) {
  double t[4];
  _mm256_storeu_pd(t, v);
  return (t[0] + t[1]) + (t[2] + t[3]);
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d va = _mm256_loadu_pd(a + i);
    const __m256d vb = _mm256_loadu_pd(b + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(va, vb));
  }
  double total = hsum(acc);
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

double sum_sq_avx2(const double* x, std::size_t n) { return dot_avx2(x, x, n); }

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vy = _mm256_loadu_pd(y + i);
    const __m256d vx = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(va, vx)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void axpby_to_avx2(double* out, const double* x, double a, const double* k,
                   std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vx = _mm256_loadu_pd(x + i);
    const __m256d vk = _mm256_loadu_pd(k + i);
    _mm256_storeu_pd(out + i, _mm256_add_pd(vx, _mm256_mul_pd(va, vk)));
  }
  for (; i < n; ++i) out[i] = x[i] + a * k[i];
}

void scale_avx2(double a, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= a;
}

void matvec_avx2(const double* A, const double* x, double* y, std::size_t rows,
                 std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_avx2(A + r * cols, x, cols);
}

void rk4_combine_avx2(double* out, const double* y, const double* k1,
                      const double* k2, const double* k3, const double* k4,
                      double h, std::size_t n) {
  const double h6 = h / 6.0;
  const __m256d vh6 = _mm256_set1_pd(h6);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v1 = _mm256_loadu_pd(k1 + i);
    const __m256d v2 = _mm256_loadu_pd(k2 + i);
    const __m256d v3 = _mm256_loadu_pd(k3 + i);
    const __m256d v4 = _mm256_loadu_pd(k4 + i);
    const __m256d t = _mm256_add_pd(_mm256_add_pd(v1, _mm256_add_pd(v2, v2)),
                                    _mm256_add_pd(_mm256_add_pd(v3, v3), v4));
    const __m256d vy = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(out + i, _mm256_add_pd(vy, _mm256_mul_pd(vh6, t)));
  }
  for (; i < n; ++i) {
    const double t = (k1[i] + (k2[i] + k2[i])) + ((k3[i] + k3[i]) + k4[i]);
    out[i] = y[i] + h6 * t;
  }
}

}  // namespace

bool avx2_supported() { return __builtin_cpu_supports("avx2") != 0; }

const Ops& avx2_ops() {
  static const Ops ops = {dot_avx2,    sum_sq_avx2,      axpy_avx2,
                          axpby_to_avx2, scale_avx2,     matvec_avx2,
                          rk4_combine_avx2, "avx2"};
  return ops;
}

#else

bool avx2_supported() { return false; }
const Ops& avx2_ops() { return scalar_ops(); }

#endif

}  // namespace conley::kernels
