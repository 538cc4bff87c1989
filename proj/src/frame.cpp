#include "conley/frame.hpp"

#include <algorithm>
#include <cmath>

#include "conley/errors.hpp"
#include "conley/kernels.hpp"

namespace conley {

Frame Frame::coordinate_span(std::vector<int32_t> indices) {
  std::sort(indices.begin(), indices.end());
  if (std::adjacent_find(indices.begin(), indices.end()) != indices.end())
    throw ValidationError("coordinate span indices must be distinct");
  Frame f;
  f.dim = static_cast<int32_t>(indices.size());
  f.support = std::move(indices);
  f.cols.assign(static_cast<std::size_t>(f.dim) * f.dim, 0.0);
  for (int32_t j = 0; j < f.dim; ++j) f.cols[j * f.dim + j] = 1.0;
  return f;
}

Frame Frame::from_columns(std::vector<int32_t> support, std::vector<double> cols,
                          int32_t dim, double tol) {
  Frame f;
  f.support = std::move(support);
  f.cols = std::move(cols);
  f.dim = dim;
  if (!std::is_sorted(f.support.begin(), f.support.end()) ||
      std::adjacent_find(f.support.begin(), f.support.end()) != f.support.end())
    throw ValidationError("frame support must be sorted and distinct");
  if (f.cols.size() != f.support.size() * static_cast<std::size_t>(dim))
    throw ValidationError("frame column data has the wrong shape");
  if (f.orth_defect() > tol)
    throw ValidationError("frame columns are not orthonormal at tolerance");
  return f;
}

double Frame::orth_defect() const {
  const std::size_t rows = support.size();
  double worst = 0.0;
  for (int32_t a = 0; a < dim; ++a) {
    for (int32_t b = a; b < dim; ++b) {
      double g = 0.0;
      for (std::size_t r = 0; r < rows; ++r)
        g += cols[r * dim + a] * cols[r * dim + b];
      worst = std::max(worst, std::fabs(g - (a == b ? 1.0 : 0.0)));
    }
  }
  return worst;
}

Vec Frame::column(int32_t j) const {
  Vec v;
  v.entries.reserve(support.size());
  for (std::size_t r = 0; r < support.size(); ++r)
    v.entries.emplace_back(support[r], cols[r * dim + j]);
  return v;
}

std::vector<Vec> Frame::columns() const {
  std::vector<Vec> cs;
  cs.reserve(dim);
  for (int32_t j = 0; j < dim; ++j) cs.push_back(column(j));
  return cs;
}

std::vector<double> Frame::to_coords(const Vec& x) const {
  std::vector<double> v(dim, 0.0);
  for (const auto& [i, xi] : x.entries) {
    auto it = std::lower_bound(support.begin(), support.end(), i);
    if (it == support.end() || *it != i) continue;
    const std::size_t r = static_cast<std::size_t>(it - support.begin());
    for (int32_t j = 0; j < dim; ++j) v[j] += cols[r * dim + j] * xi;
  }
  return v;
}

Vec Frame::from_coords(std::span<const double> v) const {
  Vec x;
  x.entries.reserve(support.size());
  for (std::size_t r = 0; r < support.size(); ++r) {
    double s = kernels::ops().dot(&cols[r * dim], v.data(), v.size());
    x.entries.emplace_back(support[r], s);
  }
  return x;
}

Vec Frame::project(const Vec& x) const { return from_coords(to_coords(x)); }

double Frame::project_defect(const Vec& x) const {
  return (x - project(x)).norm();
}

bool Frame::contains(const Frame& sub, double tol) const {
  for (int32_t j = 0; j < sub.dim; ++j)
    if (project_defect(sub.column(j)) > tol) return false;
  return true;
}

Frame Frame::mixed(std::span<const double> R, int32_t new_dim) const {
  Frame f;
  f.support = support;
  f.dim = new_dim;
  const std::size_t rows = support.size();
  f.cols.assign(rows * static_cast<std::size_t>(new_dim), 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (int32_t j = 0; j < new_dim; ++j) {
      double s = 0.0;
      for (int32_t k = 0; k < dim; ++k)
        s += cols[r * dim + k] * R[static_cast<std::size_t>(k) * new_dim + j];
      f.cols[r * new_dim + j] = s;
    }
  // Mixing by a column-orthonormal matrix preserves orthonormality; verify.
  if (f.orth_defect() > 1e-10)
    throw ValidationError("frame mixing matrix was not column-orthonormal");
  return f;
}

Frame Frame::orthonormalized(const std::vector<Vec>& raw, double drop_tol) {
  // Collect the union support first so Gram-Schmidt runs on dense rows.
  std::vector<int32_t> sup;
  for (const auto& v : raw)
    for (const auto& [i, x] : v.entries) sup.push_back(i);
  std::sort(sup.begin(), sup.end());
  sup.erase(std::unique(sup.begin(), sup.end()), sup.end());
  const std::size_t rows = sup.size();

  auto densify = [&](const Vec& v) {
    std::vector<double> d(rows, 0.0);
    for (const auto& [i, x] : v.entries) {
      auto it = std::lower_bound(sup.begin(), sup.end(), i);
      d[static_cast<std::size_t>(it - sup.begin())] = x;
    }
    return d;
  };

  std::vector<std::vector<double>> basis;
  for (const auto& v : raw) {
    std::vector<double> w = densify(v);
    // Two orthogonalization passes tame cancellation for near-dependent input.
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) {
        const double c = kernels::ops().dot(b.data(), w.data(), rows);
        kernels::ops().axpy(-c, b.data(), w.data(), rows);
      }
    const double n = std::sqrt(kernels::ops().sum_sq(w.data(), rows));
    if (n <= drop_tol) continue;
    kernels::ops().scale(1.0 / n, w.data(), rows);
    basis.push_back(std::move(w));
  }

  Frame f;
  f.support = std::move(sup);
  f.dim = static_cast<int32_t>(basis.size());
  f.cols.assign(rows * basis.size(), 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < basis.size(); ++j)
      f.cols[r * basis.size() + j] = basis[j][r];
  return f;
}

}  // namespace conley
