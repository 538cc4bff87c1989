#include "conley/homology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <unordered_map>

#include "conley/errors.hpp"

namespace conley {

int64_t HomologicalIndex::rank_at(int32_t degree) const {
  for (const GradedGroup& g : groups)
    if (g.degree == degree) return g.rank;
  return 0;
}

std::vector<int64_t> HomologicalIndex::torsion_at(int32_t degree) const {
  for (const GradedGroup& g : groups)
    if (g.degree == degree) return g.torsion;
  return {};
}

int64_t HomologicalIndex::euler_characteristic() const {
  int64_t chi = 0;
  for (const GradedGroup& g : groups)
    chi += (g.degree % 2 == 0) ? g.rank : -g.rank;
  return chi;
}

void HomologicalIndex::normalize() {
  std::vector<GradedGroup> kept;
  for (GradedGroup& g : groups) {
    std::sort(g.torsion.begin(), g.torsion.end());
    if (g.rank != 0 || !g.torsion.empty()) kept.push_back(std::move(g));
  }
  std::sort(kept.begin(), kept.end(),
            [](const GradedGroup& a, const GradedGroup& b) {
              return a.degree < b.degree;
            });
  groups = std::move(kept);
}

bool operator==(const HomologicalIndex& a, const HomologicalIndex& b) {
  if (a.groups.size() != b.groups.size()) return false;
  for (std::size_t i = 0; i < a.groups.size(); ++i) {
    const GradedGroup& x = a.groups[i];
    const GradedGroup& y = b.groups[i];
    if (x.degree != y.degree || x.rank != y.rank || x.torsion != y.torsion)
      return false;
  }
  return true;
}

bool operator!=(const HomologicalIndex& a, const HomologicalIndex& b) {
  return !(a == b);
}

namespace {

// Elementary cells are encoded per axis as t in [0, 2n]: even t is the
// vertex t/2, odd t is the unit interval [(t-1)/2, (t+1)/2].  The encoded
// id is the mixed-radix number over bases 2n+1.
struct CellCoder {
  std::vector<int64_t> bases;

  explicit CellCoder(const CubicalGrid& grid) {
    bases.reserve(grid.dims.size());
    int64_t total = 1;
    for (int32_t n : grid.dims) {
      const int64_t b = 2 * int64_t{n} + 1;
      if (total > (int64_t{1} << 60) / b)
        throw ValidationError("homology: grid too large for cell encoding");
      total *= b;
      bases.push_back(b);
    }
  }

  int64_t encode(const std::vector<int32_t>& t) const {
    int64_t id = 0;
    for (std::size_t i = 0; i < bases.size(); ++i) id = id * bases[i] + t[i];
    return id;
  }

  std::vector<int32_t> decode(int64_t id) const {
    std::vector<int32_t> t(bases.size());
    for (std::size_t i = bases.size(); i-- > 0;) {
      t[i] = static_cast<int32_t>(id % bases[i]);
      id /= bases[i];
    }
    return t;
  }
};

// Appends the 3^d closed faces of the cube with multi-index m.
void append_cube_cells(const CellCoder& coder, const std::vector<int32_t>& m,
                       std::vector<int64_t>& out) {
  const std::size_t d = m.size();
  std::vector<int32_t> t(d);
  for (std::size_t i = 0; i < d; ++i) t[i] = 2 * m[i];
  std::vector<int32_t> off(d, 0);
  for (;;) {
    std::vector<int32_t> cell(d);
    for (std::size_t i = 0; i < d; ++i) cell[i] = t[i] + off[i];
    out.push_back(coder.encode(cell));
    std::size_t i = d;
    bool wrapped = true;
    while (i-- > 0) {
      if (++off[i] <= 2) {
        wrapped = false;
        break;
      }
      off[i] = 0;
    }
    if (wrapped) break;
  }
}

int32_t cell_dim(const std::vector<int32_t>& t) {
  int32_t k = 0;
  for (int32_t x : t) k += (x & 1);
  return k;
}

struct Complex {
  std::vector<int64_t> ids;            // sorted
  std::vector<int32_t> dim;            // per cell
  std::vector<std::vector<std::pair<int32_t, int8_t>>> faces;  // idx, sign
  std::vector<std::vector<int32_t>> cofaces;
  std::vector<uint8_t> alive;
  std::vector<int32_t> faces_alive, cofaces_alive;
};

// Free/cofree eliminations: a live cell with exactly one live coface (or a
// live cell with exactly one live face) cancels against that partner.
// Each cancellation is a unit-pivot elimination of the boundary matrix
// whose pivot row (or column) is a singleton, so no fill-in arises and the
// remaining complex is chain equivalent over the integers.
void coreduce(Complex& cx) {
  const auto n = static_cast<int32_t>(cx.ids.size());
  std::vector<int32_t> stack;
  for (int32_t i = 0; i < n; ++i)
    if (cx.cofaces_alive[static_cast<std::size_t>(i)] == 1 ||
        cx.faces_alive[static_cast<std::size_t>(i)] == 1)
      stack.push_back(i);

  auto detach = [&](int32_t x, std::vector<int32_t>& touched) {
    const auto xu = static_cast<std::size_t>(x);
    cx.alive[xu] = 0;
    for (const auto& [f, sgn] : cx.faces[xu]) {
      (void)sgn;
      const auto fu = static_cast<std::size_t>(f);
      if (cx.alive[fu]) {
        --cx.cofaces_alive[fu];
        touched.push_back(f);
      }
    }
    for (int32_t c : cx.cofaces[xu]) {
      const auto cu = static_cast<std::size_t>(c);
      if (cx.alive[cu]) {
        --cx.faces_alive[cu];
        touched.push_back(c);
      }
    }
  };

  std::vector<int32_t> touched;
  while (!stack.empty()) {
    const int32_t v = stack.back();
    stack.pop_back();
    const auto vu = static_cast<std::size_t>(v);
    if (!cx.alive[vu]) continue;

    int32_t partner = -1;
    if (cx.cofaces_alive[vu] == 1) {
      for (int32_t c : cx.cofaces[vu])
        if (cx.alive[static_cast<std::size_t>(c)]) {
          partner = c;
          break;
        }
    } else if (cx.faces_alive[vu] == 1) {
      for (const auto& [f, sgn] : cx.faces[vu]) {
        (void)sgn;
        if (cx.alive[static_cast<std::size_t>(f)]) {
          partner = f;
          break;
        }
      }
    }
    if (partner < 0) continue;

    touched.clear();
    detach(v, touched);
    detach(partner, touched);
    for (int32_t t : touched) {
      const auto tu = static_cast<std::size_t>(t);
      if (cx.alive[tu] && (cx.cofaces_alive[tu] == 1 || cx.faces_alive[tu] == 1))
        stack.push_back(t);
    }
  }
}

struct SmithResult {
  int64_t rank = 0;
  std::vector<int64_t> factors;  // nonzero invariant factors, divisibility order
};

int64_t checked_mul(int64_t a, int64_t b) {
  int64_t r;
  if (__builtin_mul_overflow(a, b, &r))
    throw Error("integer overflow during homology reduction");
  return r;
}

int64_t checked_sub(int64_t a, int64_t b) {
  int64_t r;
  if (__builtin_sub_overflow(a, b, &r))
    throw Error("integer overflow during homology reduction");
  return r;
}

// Integer Smith normal form; m is row-major rows x cols and is consumed.
SmithResult smith_normal_form(std::vector<int64_t>& m, int64_t rows,
                              int64_t cols) {
  SmithResult res;
  auto at = [&](int64_t i, int64_t j) -> int64_t& {
    return m[static_cast<std::size_t>(i * cols + j)];
  };
  int64_t t = 0;
  const int64_t tmax = std::min(rows, cols);
  while (t < tmax) {
    // Pivot: smallest nonzero magnitude in the trailing block.
    int64_t pi = -1, pj = -1;
    for (int64_t i = t; i < rows; ++i)
      for (int64_t j = t; j < cols; ++j) {
        const int64_t v = std::llabs(at(i, j));
        if (v != 0 && (pi < 0 || v < std::llabs(at(pi, pj)))) {
          pi = i;
          pj = j;
        }
      }
    if (pi < 0) break;
    if (pi != t)
      for (int64_t j = 0; j < cols; ++j) std::swap(at(t, j), at(pi, j));
    if (pj != t)
      for (int64_t i = 0; i < rows; ++i) std::swap(at(i, t), at(i, pj));

    bool clean = false;
    while (!clean) {
      clean = true;
      for (int64_t i = t + 1; i < rows; ++i) {
        if (at(i, t) == 0) continue;
        const int64_t q = at(i, t) / at(t, t);
        if (q != 0)
          for (int64_t j = t; j < cols; ++j)
            at(i, j) = checked_sub(at(i, j), checked_mul(q, at(t, j)));
        if (at(i, t) != 0) {
          for (int64_t j = t; j < cols; ++j) std::swap(at(t, j), at(i, j));
          clean = false;
        }
      }
      for (int64_t j = t + 1; j < cols; ++j) {
        if (at(t, j) == 0) continue;
        const int64_t q = at(t, j) / at(t, t);
        if (q != 0)
          for (int64_t i = t; i < rows; ++i)
            at(i, j) = checked_sub(at(i, j), checked_mul(q, at(i, t)));
        if (at(t, j) != 0) {
          for (int64_t i = t; i < rows; ++i) std::swap(at(i, t), at(i, j));
          clean = false;
        }
      }
    }

    // Enforce divisibility of the trailing block by the pivot.
    bool redo = false;
    for (int64_t i = t + 1; i < rows && !redo; ++i)
      for (int64_t j = t + 1; j < cols && !redo; ++j)
        if (at(i, j) % at(t, t) != 0) {
          for (int64_t jj = t; jj < cols; ++jj)
            at(t, jj) = checked_sub(at(t, jj), -at(i, jj));
          redo = true;
        }
    if (redo) continue;
    ++t;
  }
  res.rank = t;
  for (int64_t i = 0; i < t; ++i) {
    const int64_t v = std::llabs(at(i, i));
    res.factors.push_back(v);
  }
  return res;
}

Complex build_relative_complex(const CombinatorialIndexPair& pair) {
  const CubicalGrid& grid = pair.grid;
  const CellCoder coder(grid);

  std::vector<int64_t> p0_cells;
  p0_cells.reserve(pair.p0.size() * 8);
  for (int64_t c : pair.p0) append_cube_cells(coder, grid.multi_of(c), p0_cells);
  std::sort(p0_cells.begin(), p0_cells.end());
  p0_cells.erase(std::unique(p0_cells.begin(), p0_cells.end()), p0_cells.end());

  CubeSet core;
  core.reserve(pair.p1.size());
  std::set_difference(pair.p1.begin(), pair.p1.end(), pair.p0.begin(),
                      pair.p0.end(), std::back_inserter(core));

  Complex cx;
  {
    std::vector<int64_t> raw;
    raw.reserve(core.size() * 8);
    for (int64_t c : core) append_cube_cells(coder, grid.multi_of(c), raw);
    std::sort(raw.begin(), raw.end());
    raw.erase(std::unique(raw.begin(), raw.end()), raw.end());
    cx.ids.reserve(raw.size());
    for (int64_t id : raw)
      if (!std::binary_search(p0_cells.begin(), p0_cells.end(), id))
        cx.ids.push_back(id);
  }

  const auto n = cx.ids.size();
  cx.dim.resize(n);
  cx.faces.resize(n);
  cx.cofaces.resize(n);
  cx.alive.assign(n, 1);

  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<int32_t> t = coder.decode(cx.ids[i]);
    cx.dim[i] = cell_dim(t);
    int32_t odd_before = 0;
    for (std::size_t ax = 0; ax < t.size(); ++ax) {
      if ((t[ax] & 1) == 0) continue;
      const auto base_sign = static_cast<int8_t>(odd_before % 2 == 0 ? 1 : -1);
      std::vector<int32_t> ft = t;
      for (int side = 0; side < 2; ++side) {
        ft[ax] = t[ax] + (side == 0 ? 1 : -1);  // hi vertex, then lo vertex
        const int64_t fid = coder.encode(ft);
        const auto it = std::lower_bound(cx.ids.begin(), cx.ids.end(), fid);
        if (it != cx.ids.end() && *it == fid) {
          const auto fidx = static_cast<int32_t>(it - cx.ids.begin());
          const auto sgn =
              static_cast<int8_t>(side == 0 ? base_sign : -base_sign);
          cx.faces[i].push_back({fidx, sgn});
        }
      }
      ++odd_before;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [f, sgn] : cx.faces[i]) {
      (void)sgn;
      cx.cofaces[static_cast<std::size_t>(f)].push_back(
          static_cast<int32_t>(i));
    }
  cx.faces_alive.resize(n);
  cx.cofaces_alive.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    cx.faces_alive[i] = static_cast<int32_t>(cx.faces[i].size());
    cx.cofaces_alive[i] = static_cast<int32_t>(cx.cofaces[i].size());
  }
  return cx;
}

}  // namespace

HomologicalIndex relative_homology(const CombinatorialIndexPair& pair) {
  Complex cx = build_relative_complex(pair);
  coreduce(cx);

  int32_t maxdim = 0;
  for (std::size_t i = 0; i < cx.ids.size(); ++i)
    if (cx.alive[i]) maxdim = std::max(maxdim, cx.dim[i]);

  // Live cells per degree, in id order; local column indices per degree.
  std::vector<std::vector<int32_t>> cells(static_cast<std::size_t>(maxdim) + 1);
  std::vector<int32_t> local(cx.ids.size(), -1);
  for (std::size_t i = 0; i < cx.ids.size(); ++i) {
    if (!cx.alive[i]) continue;
    auto& bucket = cells[static_cast<std::size_t>(cx.dim[i])];
    local[i] = static_cast<int32_t>(bucket.size());
    bucket.push_back(static_cast<int32_t>(i));
  }

  std::vector<SmithResult> snf(static_cast<std::size_t>(maxdim) + 2);
  for (int32_t k = 1; k <= maxdim; ++k) {
    const auto& cols = cells[static_cast<std::size_t>(k)];
    const auto& rws = cells[static_cast<std::size_t>(k) - 1];
    if (cols.empty() || rws.empty()) continue;
    const auto nr = static_cast<int64_t>(rws.size());
    const auto ncl = static_cast<int64_t>(cols.size());
    if (nr * ncl > int64_t{4000000})
      throw Error("homology reduction stalled: relative complex too large");
    std::vector<int64_t> mat(static_cast<std::size_t>(nr * ncl), 0);
    for (int64_t j = 0; j < ncl; ++j) {
      const auto ci = static_cast<std::size_t>(cols[static_cast<std::size_t>(j)]);
      for (const auto& [f, sgn] : cx.faces[ci]) {
        const auto fu = static_cast<std::size_t>(f);
        if (!cx.alive[fu]) continue;
        mat[static_cast<std::size_t>(int64_t{local[fu]} * ncl + j)] = sgn;
      }
    }
    snf[static_cast<std::size_t>(k)] = smith_normal_form(mat, nr, ncl);
  }

  HomologicalIndex out;
  for (int32_t k = 0; k <= maxdim; ++k) {
    const auto nk = static_cast<int64_t>(cells[static_cast<std::size_t>(k)].size());
    const int64_t rk = snf[static_cast<std::size_t>(k)].rank;
    const int64_t rk1 = snf[static_cast<std::size_t>(k) + 1].rank;
    GradedGroup g;
    g.degree = k;
    g.rank = nk - rk - rk1;
    for (int64_t f : snf[static_cast<std::size_t>(k) + 1].factors)
      if (f >= 2) g.torsion.push_back(f);
    out.groups.push_back(std::move(g));
  }
  out.normalize();
  return out;
}

int64_t relative_cell_euler(const CombinatorialIndexPair& pair) {
  const Complex cx = build_relative_complex(pair);
  int64_t chi = 0;
  for (std::size_t i = 0; i < cx.ids.size(); ++i)
    chi += (cx.dim[i] % 2 == 0) ? 1 : -1;
  return chi;
}

HomologicalIndex linear_index_shortcut(const SignatureDecomposition& sig) {
  if (sig.v_zero.dim != 0)
    throw NondegeneracyError(
        "linear index shortcut needs a nondegenerate block: the zero class "
        "is nonempty");
  HomologicalIndex out;
  GradedGroup g;
  g.degree = sig.v_minus.dim;
  g.rank = 1;
  out.groups.push_back(std::move(g));
  return out;
}

HomologicalIndex kunneth_product(const HomologicalIndex& a,
                                 const HomologicalIndex& b) {
  HomologicalIndex out;
  for (const GradedGroup& x : a.groups)
    for (const GradedGroup& y : b.groups) {
      if (x.rank == 0 || y.rank == 0) continue;
      const int32_t k = x.degree + y.degree;
      bool found = false;
      for (GradedGroup& g : out.groups)
        if (g.degree == k) {
          g.rank += x.rank * y.rank;
          found = true;
          break;
        }
      if (!found) {
        GradedGroup g;
        g.degree = k;
        g.rank = x.rank * y.rank;
        out.groups.push_back(std::move(g));
      }
    }
  out.normalize();
  return out;
}

}  // namespace conley
