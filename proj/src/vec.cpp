#include "conley/vec.hpp"

#include <algorithm>
#include <cmath>

namespace conley {

Vec Vec::unit(int32_t i, double v) {
  Vec r;
  r.entries.emplace_back(i, v);
  return r;
}

Vec Vec::from_dense(std::span<const double> x, int32_t first_index) {
  Vec r;
  r.entries.reserve(x.size());
  for (std::size_t k = 0; k < x.size(); ++k)
    r.entries.emplace_back(first_index + static_cast<int32_t>(k), x[k]);
  return r;
}

namespace {
auto find_entry(auto& e, int32_t i) {
  return std::lower_bound(e.begin(), e.end(), i,
                          [](const auto& p, int32_t j) { return p.first < j; });
}
}  // namespace

double Vec::at(int32_t i) const {
  auto it = find_entry(entries, i);
  return (it != entries.end() && it->first == i) ? it->second : 0.0;
}

void Vec::set(int32_t i, double v) {
  auto it = find_entry(entries, i);
  if (it != entries.end() && it->first == i)
    it->second = v;
  else
    entries.insert(it, {i, v});
}

void Vec::add(int32_t i, double v) {
  auto it = find_entry(entries, i);
  if (it != entries.end() && it->first == i)
    it->second += v;
  else
    entries.insert(it, {i, v});
}

int32_t Vec::max_index() const {
  return entries.empty() ? -1 : entries.back().first;
}

double Vec::dot(const Vec& o) const {
  double s = 0.0;
  auto a = entries.begin();
  auto b = o.entries.begin();
  while (a != entries.end() && b != o.entries.end()) {
    if (a->first < b->first)
      ++a;
    else if (b->first < a->first)
      ++b;
    else {
      s += a->second * b->second;
      ++a;
      ++b;
    }
  }
  return s;
}

double Vec::norm_sq() const {
  double s = 0.0;
  for (const auto& [i, v] : entries) s += v * v;
  return s;
}

double Vec::norm() const { return std::sqrt(norm_sq()); }

Vec& Vec::operator*=(double a) {
  for (auto& [i, v] : entries) v *= a;
  return *this;
}

Vec& Vec::axpy(double a, const Vec& x) {
  std::vector<std::pair<int32_t, double>> merged;
  merged.reserve(entries.size() + x.entries.size());
  auto p = entries.begin();
  auto q = x.entries.begin();
  while (p != entries.end() || q != x.entries.end()) {
    if (q == x.entries.end() || (p != entries.end() && p->first < q->first)) {
      merged.push_back(*p++);
    } else if (p == entries.end() || q->first < p->first) {
      merged.emplace_back(q->first, a * q->second);
      ++q;
    } else {
      merged.emplace_back(p->first, p->second + a * q->second);
      ++p;
      ++q;
    }
  }
  entries = std::move(merged);
  return *this;
}

Vec Vec::operator+(const Vec& o) const {
  Vec r = *this;
  r.axpy(1.0, o);
  return r;
}

Vec Vec::operator-(const Vec& o) const {
  Vec r = *this;
  r.axpy(-1.0, o);
  return r;
}

}  // namespace conley
