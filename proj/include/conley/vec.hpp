#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace conley {

// Finitely supported vector in the coordinate model of the ambient
// separable Hilbert space.  Entries are (index, value) pairs sorted by
// index; indices are 0-based.  All algebra keeps the entry list sorted and
// never stores two entries for one index.  Exact zeros produced by
// cancellation are kept (they are harmless and keeping them makes results
// reproducible across code paths).
struct Vec {
  std::vector<std::pair<int32_t, double>> entries;

  Vec() = default;
  static Vec unit(int32_t i, double v = 1.0);
  static Vec from_dense(std::span<const double> x, int32_t first_index = 0);

  double at(int32_t i) const;          // 0.0 off support
  void set(int32_t i, double v);       // inserts or overwrites
  void add(int32_t i, double v);       // += on one coordinate
  int32_t max_index() const;           // -1 when empty

  double dot(const Vec& o) const;
  double norm_sq() const;
  double norm() const;

  Vec& operator*=(double a);
  Vec& axpy(double a, const Vec& x);   // *this += a*x
  Vec operator+(const Vec& o) const;
  Vec operator-(const Vec& o) const;

  bool empty() const { return entries.empty(); }
};

}  // namespace conley
