#include "conley/cubical.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <unordered_map>

#include "conley/errors.hpp"

namespace conley {

namespace {

// Inclusive per-axis boxes are inflated by this fraction of a cell before
// ranging so a box touching a cube face keeps that cube.  Over-inclusion
// only grows the outer approximation.
constexpr double kFaceSlack = 1e-9;

void check_sorted(const CubeSet& s, const char* what) {
  if (!std::is_sorted(s.begin(), s.end()) ||
      std::adjacent_find(s.begin(), s.end()) != s.end())
    throw ValidationError(std::string(what) + ": cube set not sorted unique");
}

CubeSet set_union(const CubeSet& a, const CubeSet& b) {
  CubeSet r;
  r.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(),
                 std::back_inserter(r));
  return r;
}

CubeSet set_difference(const CubeSet& a, const CubeSet& b) {
  CubeSet r;
  r.reserve(a.size());
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(),
                      std::back_inserter(r));
  return r;
}

void sort_unique(CubeSet& s) {
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
}

}  // namespace

bool cube_set_contains(const CubeSet& s, int64_t id) {
  return std::binary_search(s.begin(), s.end(), id);
}

CubicalGrid CubicalGrid::make(Frame frame, std::vector<double> center,
                              std::vector<double> half,
                              std::vector<int32_t> dims) {
  const auto d = static_cast<std::size_t>(frame.dim);
  if (center.size() != d || half.size() != d || dims.size() != d)
    throw ValidationError("grid: box and subdivision sizes must match the frame");
  int64_t total = 1;
  for (std::size_t i = 0; i < d; ++i) {
    if (!(half[i] > 0.0) || !std::isfinite(half[i]) || !std::isfinite(center[i]))
      throw ValidationError("grid: box must be finite with positive half widths");
    const int32_t n = dims[i];
    if (n < 8 || (n & (n - 1)) != 0)
      throw ValidationError("grid: subdivisions must be powers of two, at least 8");
    if (total > (int64_t{1} << 56) / n)
      throw ValidationError("grid: too many cubes");
    total *= n;
  }
  CubicalGrid g;
  g.frame = std::move(frame);
  g.center = std::move(center);
  g.half = std::move(half);
  g.dims = std::move(dims);
  return g;
}

int64_t CubicalGrid::total_cubes() const {
  int64_t total = 1;
  for (int32_t n : dims) total *= n;
  return total;
}

double CubicalGrid::cell_width(int32_t axis) const {
  return 2.0 * half[static_cast<std::size_t>(axis)] /
         dims[static_cast<std::size_t>(axis)];
}

double CubicalGrid::cell_diameter() const {
  double s = 0.0;
  for (int32_t i = 0; i < dim(); ++i) {
    const double w = cell_width(i);
    s += w * w;
  }
  return std::sqrt(s);
}

int64_t CubicalGrid::id_of(const std::vector<int32_t>& multi) const {
  if (multi.size() != dims.size())
    throw ValidationError("grid: multi-index dimension mismatch");
  int64_t id = 0;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (multi[i] < 0 || multi[i] >= dims[i])
      throw ValidationError("grid: multi-index out of range");
    id = id * dims[i] + multi[i];
  }
  return id;
}

std::vector<int32_t> CubicalGrid::multi_of(int64_t id) const {
  if (id < 0 || id >= total_cubes())
    throw ValidationError("grid: cube id out of range");
  std::vector<int32_t> multi(dims.size());
  for (std::size_t i = dims.size(); i-- > 0;) {
    multi[i] = static_cast<int32_t>(id % dims[i]);
    id /= dims[i];
  }
  return multi;
}

std::vector<double> CubicalGrid::cube_center(
    const std::vector<int32_t>& multi) const {
  std::vector<double> c(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const double w = 2.0 * half[i] / dims[i];
    c[i] = center[i] - half[i] + (multi[i] + 0.5) * w;
  }
  return c;
}

CubeSet CubicalGrid::cubes_meeting_ball(double radius) const {
  if (!(radius > 0.0)) throw ValidationError("grid: ball radius must be positive");
  const auto d = dims.size();
  CubeSet out;
  std::vector<int32_t> m(d, 0);
  const int64_t total = total_cubes();
  for (int64_t id = 0; id < total; ++id) {
    double dist2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double w = 2.0 * half[i] / dims[i];
      const double lo = center[i] - half[i] + m[i] * w;
      const double hi = lo + w;
      const double nearest = std::min(std::max(0.0, lo), hi);
      dist2 += nearest * nearest;
    }
    if (dist2 <= radius * radius) out.push_back(id);
    for (std::size_t i = d; i-- > 0;) {
      if (++m[i] < dims[i]) break;
      m[i] = 0;
    }
  }
  return out;
}

CubeSet CubicalGrid::cubes_meeting_box(const std::vector<double>& lo,
                                       const std::vector<double>& hi) const {
  const auto d = dims.size();
  if (lo.size() != d || hi.size() != d)
    throw ValidationError("grid: box dimension mismatch");
  std::vector<int32_t> a(d), b(d);
  for (std::size_t i = 0; i < d; ++i) {
    if (!(lo[i] <= hi[i])) throw ValidationError("grid: empty box");
    const double w = 2.0 * half[i] / dims[i];
    const double glo = center[i] - half[i];
    const double slack = kFaceSlack * w;
    const auto ka = static_cast<int64_t>(std::floor((lo[i] - glo - slack) / w));
    const auto kb = static_cast<int64_t>(std::floor((hi[i] - glo + slack) / w));
    if (kb < 0 || ka >= dims[i]) return {};
    a[i] = static_cast<int32_t>(std::max<int64_t>(ka, 0));
    b[i] = static_cast<int32_t>(std::min<int64_t>(kb, dims[i] - 1));
  }
  CubeSet out;
  std::vector<int32_t> m = a;
  for (;;) {
    out.push_back(id_of(m));
    std::size_t i = d;
    while (i-- > 0) {
      if (++m[i] <= b[i]) break;
      m[i] = a[i];
      if (i == 0) return out;
    }
    if (i == std::size_t(-1)) break;
  }
  return out;
}

OuterMap build_outer_map(const FiniteField& f, const CubicalGrid& grid,
                         double tau, double tol) {
  const int32_t d = f.dim();
  if (grid.dim() != d)
    throw ValidationError("outer map: grid dimension must match the field");
  if (grid.frame.support != f.frame.support ||
      grid.frame.cols.size() != f.frame.cols.size())
    throw ValidationError("outer map: grid must live on the field's frame");
  for (std::size_t i = 0; i < grid.frame.cols.size(); ++i)
    if (std::fabs(grid.frame.cols[i] - f.frame.cols[i]) > 1e-12)
      throw ValidationError("outer map: grid must live on the field's frame");
  for (int32_t i = 0; i < d; ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (std::fabs(grid.center[u] - f.box_center[u]) + grid.half[u] >
        f.box_half[u] + 1e-12)
      throw ValidationError("outer map: grid box must sit inside the field box");
  }
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw ValidationError("outer map: tau must be positive");
  if (!(tol > 0.0)) throw ValidationError("outer map: tol must be positive");

  OuterMap m;
  m.field = f;
  m.grid = grid;
  m.tau = tau;
  m.tol = tol;

  const std::vector<double> g = comparison_matrix(f);
  const std::vector<double> eg = mat_exp(g, d, tau);
  std::vector<double> ghat = g;
  for (int32_t i = 0; i < d; ++i) {
    auto& gii = ghat[static_cast<std::size_t>(i) * d + i];
    gii = std::max(gii, 0.0);
  }
  m.exp_ghat = mat_exp(ghat, d, tau);
  m.bloat_halfw.assign(static_cast<std::size_t>(d), 0.0);
  for (int32_t i = 0; i < d; ++i) {
    double s = 0.0;
    for (int32_t j = 0; j < d; ++j)
      s += eg[static_cast<std::size_t>(i) * d + j] * 0.5 * grid.cell_width(j);
    m.bloat_halfw[static_cast<std::size_t>(i)] = s;
  }
  return m;
}

const ImageRange& OuterMap::image(int64_t cube) const {
  auto it = memo_.find(cube);
  if (it != memo_.end()) return it->second;

  ImageRange r;
  const std::vector<int32_t> multi = grid.multi_of(cube);
  const std::vector<double> x = grid.cube_center(multi);
  bool exited = false;
  FlowStep fs;
  try {
    fs = time_tau_map(field, x, tau, tol);
  } catch (const BoxExitError&) {
    exited = true;
  }
  if (exited) {
    r.outside = true;
    return memo_.emplace(cube, std::move(r)).first->second;
  }

  const auto d = static_cast<std::size_t>(grid.dim());
  r.lo.resize(d);
  r.hi.resize(d);
  bool empty = false;
  for (std::size_t i = 0; i < d; ++i) {
    double err = 0.0;
    for (std::size_t j = 0; j < d; ++j) err += exp_ghat[i * d + j];
    err *= fs.r_enc;
    const double rad = bloat_halfw[i] + err;
    const double w = grid.cell_width(static_cast<int32_t>(i));
    const double glo = grid.center[i] - grid.half[i];
    const double slack = kFaceSlack * w;
    const double blo = fs.end[i] - rad;
    const double bhi = fs.end[i] + rad;
    const auto ka = static_cast<int64_t>(std::floor((blo - glo - slack) / w));
    const auto kb = static_cast<int64_t>(std::floor((bhi - glo + slack) / w));
    if (ka < 0 || kb >= grid.dims[i]) r.outside = true;
    if (kb < 0 || ka >= grid.dims[i]) empty = true;
    r.lo[i] = static_cast<int32_t>(std::max<int64_t>(ka, 0));
    r.hi[i] = static_cast<int32_t>(std::min<int64_t>(kb, grid.dims[i] - 1));
  }
  if (empty) {
    r.lo.clear();
    r.hi.clear();
    r.outside = true;
  }
  return memo_.emplace(cube, std::move(r)).first->second;
}

void OuterMap::for_each_image(const ImageRange& r,
                              const std::function<void(int64_t)>& fn) const {
  if (r.lo.empty()) return;
  const std::size_t d = r.lo.size();
  std::vector<int32_t> m(r.lo);
  for (;;) {
    int64_t id = 0;
    for (std::size_t i = 0; i < d; ++i) id = id * grid.dims[i] + m[i];
    fn(id);
    std::size_t i = d;
    bool wrapped = true;
    while (i-- > 0) {
      if (++m[i] <= r.hi[i]) {
        wrapped = false;
        break;
      }
      m[i] = r.lo[i];
    }
    if (wrapped) break;
  }
}

CubeSet OuterMap::image_set(const CubeSet& cubes) const {
  CubeSet out;
  for (int64_t c : cubes) {
    const ImageRange& r = image(c);
    for_each_image(r, [&](int64_t id) { out.push_back(id); });
  }
  sort_unique(out);
  return out;
}

namespace {

// Odometer over one cube's image range that yields in-region local node
// indices one at a time; used by the strongly-connected-component passes
// so no edge list is ever materialized.
struct EdgeCursor {
  const ImageRange* r = nullptr;
  std::vector<int32_t> m;
  bool done = false;

  void reset(const ImageRange& range) {
    r = &range;
    if (r->lo.empty()) {
      done = true;
      return;
    }
    m = r->lo;
    done = false;
  }

  // Returns the next target cube id, or -1 when exhausted.
  int64_t next(const CubicalGrid& grid) {
    if (done) return -1;
    int64_t id = 0;
    const std::size_t d = m.size();
    for (std::size_t i = 0; i < d; ++i) id = id * grid.dims[i] + m[i];
    std::size_t i = d;
    bool wrapped = true;
    while (i-- > 0) {
      if (++m[i] <= r->hi[i]) {
        wrapped = false;
        break;
      }
      m[i] = r->lo[i];
    }
    if (wrapped) done = true;
    return id;
  }
};

struct SccResult {
  std::vector<int32_t> comp;      // per local node, completion-ordered ids
  int32_t comp_count = 0;
  std::vector<uint8_t> cyclic;    // per component
};

// Iterative Tarjan over the region-induced subgraph.  Component ids are
// assigned in completion order, so every condensation edge u -> v has
// comp[v] < comp[u]; the reachability passes below rely on that.
SccResult strongly_connected(const OuterMap& m, const CubeSet& region,
                             const std::unordered_map<int64_t, int32_t>& local) {
  const auto n = static_cast<int32_t>(region.size());
  SccResult res;
  res.comp.assign(static_cast<std::size_t>(n), -1);
  std::vector<int32_t> disc(static_cast<std::size_t>(n), -1);
  std::vector<int32_t> low(static_cast<std::size_t>(n), 0);
  std::vector<uint8_t> onstack(static_cast<std::size_t>(n), 0);
  std::vector<uint8_t> selfloop(static_cast<std::size_t>(n), 0);
  std::vector<int32_t> stack;
  stack.reserve(static_cast<std::size_t>(n));

  struct Dfs {
    int32_t v;
    EdgeCursor cur;
  };
  std::vector<Dfs> frames;
  std::vector<int32_t> comp_size;
  int32_t timer = 0;

  for (int32_t root = 0; root < n; ++root) {
    if (disc[static_cast<std::size_t>(root)] != -1) continue;
    frames.push_back({root, {}});
    frames.back().cur.reset(m.image(region[static_cast<std::size_t>(root)]));
    disc[static_cast<std::size_t>(root)] = low[static_cast<std::size_t>(root)] = timer++;
    stack.push_back(root);
    onstack[static_cast<std::size_t>(root)] = 1;

    while (!frames.empty()) {
      Dfs& f = frames.back();
      const auto v = static_cast<std::size_t>(f.v);
      int64_t tid;
      bool descended = false;
      while ((tid = f.cur.next(m.grid)) != -1) {
        auto it = local.find(tid);
        if (it == local.end()) continue;
        const int32_t u = it->second;
        const auto uu = static_cast<std::size_t>(u);
        if (u == f.v) selfloop[v] = 1;
        if (disc[uu] == -1) {
          frames.push_back({u, {}});
          frames.back().cur.reset(m.image(region[uu]));
          disc[uu] = low[uu] = timer++;
          stack.push_back(u);
          onstack[uu] = 1;
          descended = true;
          break;
        }
        if (onstack[uu]) low[v] = std::min(low[v], disc[uu]);
      }
      if (descended) continue;
      // v is exhausted
      if (low[v] == disc[v]) {
        int32_t size = 0;
        for (;;) {
          const int32_t w = stack.back();
          stack.pop_back();
          onstack[static_cast<std::size_t>(w)] = 0;
          res.comp[static_cast<std::size_t>(w)] = res.comp_count;
          ++size;
          if (w == f.v) break;
        }
        comp_size.push_back(size);
        ++res.comp_count;
      }
      const int32_t vlow = low[v];
      frames.pop_back();
      if (!frames.empty()) {
        const auto p = static_cast<std::size_t>(frames.back().v);
        low[p] = std::min(low[p], vlow);
      }
    }
  }

  res.cyclic.assign(static_cast<std::size_t>(res.comp_count), 0);
  for (int32_t v = 0; v < n; ++v) {
    const auto c = static_cast<std::size_t>(res.comp[static_cast<std::size_t>(v)]);
    if (selfloop[static_cast<std::size_t>(v)] ||
        comp_size[c] >= 2)
      res.cyclic[c] = 1;
  }
  return res;
}

}  // namespace

CubeSet invariant_part(const OuterMap& m, const CubeSet& region) {
  check_sorted(region, "invariant_part");
  if (region.empty()) return {};
  if (region.front() < 0 || region.back() >= m.grid.total_cubes())
    throw ValidationError("invariant_part: region cube id out of range");

  std::unordered_map<int64_t, int32_t> local;
  local.reserve(region.size() * 2);
  for (std::size_t i = 0; i < region.size(); ++i)
    local.emplace(region[i], static_cast<int32_t>(i));

  const SccResult scc = strongly_connected(m, region, local);
  const auto n = static_cast<int32_t>(region.size());
  const auto nc = static_cast<std::size_t>(scc.comp_count);

  // Bucket local nodes by component.
  std::vector<int32_t> offset(nc + 1, 0);
  for (int32_t v = 0; v < n; ++v)
    ++offset[static_cast<std::size_t>(scc.comp[static_cast<std::size_t>(v)]) + 1];
  for (std::size_t c = 0; c < nc; ++c) offset[c + 1] += offset[c];
  std::vector<int32_t> bucket(static_cast<std::size_t>(n));
  {
    std::vector<int32_t> fill(offset.begin(), offset.end() - 1);
    for (int32_t v = 0; v < n; ++v) {
      const auto c = static_cast<std::size_t>(scc.comp[static_cast<std::size_t>(v)]);
      bucket[static_cast<std::size_t>(fill[c]++)] = v;
    }
  }

  // A node has an infinite forward path iff its component reaches a cyclic
  // component.  Condensation edges point toward smaller component ids, so
  // an ascending sweep settles the flags in one pass.
  std::vector<uint8_t> fwd(scc.cyclic.begin(), scc.cyclic.end());
  EdgeCursor cur;
  for (std::size_t c = 0; c < nc; ++c) {
    if (fwd[c]) continue;
    bool hit = false;
    for (int32_t k = offset[c]; k < offset[c + 1] && !hit; ++k) {
      const auto v = static_cast<std::size_t>(bucket[static_cast<std::size_t>(k)]);
      cur.reset(m.image(region[v]));
      int64_t tid;
      while ((tid = cur.next(m.grid)) != -1) {
        auto it = local.find(tid);
        if (it == local.end()) continue;
        const auto tc = static_cast<std::size_t>(
            scc.comp[static_cast<std::size_t>(it->second)]);
        if (tc != c && fwd[tc]) {
          hit = true;
          break;
        }
      }
    }
    if (hit) fwd[c] = 1;
  }

  // A node has an infinite backward path iff some cyclic component reaches
  // it; propagate down the condensation with a descending sweep.
  std::vector<uint8_t> bwd(scc.cyclic.begin(), scc.cyclic.end());
  for (std::size_t c = nc; c-- > 0;) {
    if (!bwd[c]) continue;
    for (int32_t k = offset[c]; k < offset[c + 1]; ++k) {
      const auto v = static_cast<std::size_t>(bucket[static_cast<std::size_t>(k)]);
      cur.reset(m.image(region[v]));
      int64_t tid;
      while ((tid = cur.next(m.grid)) != -1) {
        auto it = local.find(tid);
        if (it == local.end()) continue;
        bwd[static_cast<std::size_t>(
            scc.comp[static_cast<std::size_t>(it->second)])] = 1;
      }
    }
  }

  CubeSet s;
  for (int32_t v = 0; v < n; ++v) {
    const auto c = static_cast<std::size_t>(scc.comp[static_cast<std::size_t>(v)]);
    if (fwd[c] && bwd[c]) s.push_back(region[static_cast<std::size_t>(v)]);
  }
  return s;  // region is sorted, so s is sorted
}

namespace {

// Appends the 3^d - 1 face/corner neighbors of multi that stay on the
// grid; returns false when some neighbor falls off the grid entirely.
bool append_neighbors(const CubicalGrid& grid, const std::vector<int32_t>& multi,
                      CubeSet& out) {
  const std::size_t d = multi.size();
  std::vector<int32_t> delta(d, -1);
  bool all_on_grid = true;
  for (;;) {
    bool zero = true, valid = true;
    for (std::size_t i = 0; i < d; ++i) {
      if (delta[i] != 0) zero = false;
      const int32_t x = multi[i] + delta[i];
      if (x < 0 || x >= grid.dims[i]) valid = false;
    }
    if (!zero) {
      if (valid) {
        std::vector<int32_t> nb(d);
        for (std::size_t i = 0; i < d; ++i) nb[i] = multi[i] + delta[i];
        out.push_back(grid.id_of(nb));
      } else {
        all_on_grid = false;
      }
    }
    std::size_t i = d;
    bool wrapped = true;
    while (i-- > 0) {
      if (++delta[i] <= 1) {
        wrapped = false;
        break;
      }
      delta[i] = -1;
    }
    if (wrapped) break;
  }
  return all_on_grid;
}

}  // namespace

IsolationReport check_isolation(const OuterMap& m, const CubeSet& region) {
  check_sorted(region, "check_isolation");
  IsolationReport rep;
  rep.s = invariant_part(m, region);

  // Region cubes adjacent to a non-region cube (or to the grid edge) form
  // the boundary layer; the grown invariant set must avoid it.
  CubeSet grown = rep.s;
  bool on_grid = true;
  for (int64_t c : rep.s)
    on_grid = append_neighbors(m.grid, m.grid.multi_of(c), grown) && on_grid;
  sort_unique(grown);

  for (int64_t c : grown) {
    if (!cube_set_contains(region, c)) {
      rep.offending.push_back(c);
      continue;
    }
    CubeSet nbs;
    const bool interior_nb = append_neighbors(m.grid, m.grid.multi_of(c), nbs);
    bool boundary = !interior_nb;
    for (int64_t nb : nbs)
      if (!cube_set_contains(region, nb)) {
        boundary = true;
        break;
      }
    if (boundary) rep.offending.push_back(c);
  }
  if (!on_grid) rep.offending.push_back(-1);
  sort_unique(rep.offending);
  rep.ok = rep.offending.empty();
  return rep;
}

PairCheck verify_index_pair(const OuterMap& m,
                            const CombinatorialIndexPair& pair) {
  check_sorted(pair.p1, "verify_index_pair p1");
  check_sorted(pair.p0, "verify_index_pair p0");
  check_sorted(pair.s, "verify_index_pair s");
  for (int64_t c : pair.p0)
    if (!cube_set_contains(pair.p1, c))
      throw ValidationError("index pair: p0 must be a subset of p1");
  for (int64_t c : pair.s)
    if (!cube_set_contains(pair.p1, c))
      throw ValidationError("index pair: s must be a subset of p1");

  PairCheck chk;

  chk.disjoint = true;
  for (int64_t c : pair.s)
    if (cube_set_contains(pair.p0, c)) {
      chk.disjoint = false;
      break;
    }

  // Images of exit cubes meet p1 only inside p0.
  chk.positively_invariant = true;
  for (int64_t c : pair.p0) {
    const ImageRange& r = m.image(c);
    bool bad = false;
    m.for_each_image(r, [&](int64_t id) {
      if (!bad && cube_set_contains(pair.p1, id) &&
          !cube_set_contains(pair.p0, id))
        bad = true;
    });
    if (bad) {
      chk.positively_invariant = false;
      break;
    }
  }

  // Every cube of p1 outside p0 maps into p1 and never off the grid, so
  // any escape from p1 has to pass through p0 first.
  chk.exit_through_p0 = true;
  const CubeSet core = set_difference(pair.p1, pair.p0);
  for (int64_t c : core) {
    const ImageRange& r = m.image(c);
    if (r.outside) {
      chk.exit_through_p0 = false;
      break;
    }
    bool bad = false;
    m.for_each_image(r, [&](int64_t id) {
      if (!bad && !cube_set_contains(pair.p1, id)) bad = true;
    });
    if (bad) {
      chk.exit_through_p0 = false;
      break;
    }
  }
  return chk;
}

CombinatorialIndexPair build_index_pair(const OuterMap& m,
                                        const CubeSet& region) {
  const IsolationReport iso = check_isolation(m, region);
  if (!iso.ok)
    throw IsolationError(
        "invariant set touches the region boundary; enlarge the region or "
        "refine the grid");

  for (int64_t c : iso.s)
    if (m.image(c).outside)
      throw RefineError("an invariant cube maps off the grid; refine the grid");

  CombinatorialIndexPair pair;
  pair.grid = m.grid;
  pair.s = iso.s;
  const CubeSet ms = m.image_set(iso.s);
  pair.p1 = set_union(iso.s, ms);
  pair.p0 = set_difference(ms, iso.s);

  const PairCheck chk = verify_index_pair(m, pair);
  if (!chk.disjoint)
    throw RefineError("index pair check failed: exit set meets the invariant set");
  if (!chk.positively_invariant)
    throw RefineError(
        "index pair check failed: the exit set is not positively invariant; "
        "refine the grid");
  if (!chk.exit_through_p0)
    throw RefineError(
        "index pair check failed: an escape bypasses the exit set; refine "
        "the grid");
  return pair;
}

CombinatorialIndexPair product_index_pair(const CombinatorialIndexPair& p,
                                          const CombinatorialIndexPair& q) {
  // Frames on disjoint supports merge into one orthonormal frame.
  {
    std::vector<int32_t> inter;
    std::set_intersection(p.grid.frame.support.begin(), p.grid.frame.support.end(),
                          q.grid.frame.support.begin(), q.grid.frame.support.end(),
                          std::back_inserter(inter));
    if (!inter.empty())
      throw ValidationError("product pair: frames must have disjoint supports");
  }
  const Frame& fa = p.grid.frame;
  const Frame& fb = q.grid.frame;
  std::vector<int32_t> support(fa.support);
  support.insert(support.end(), fb.support.begin(), fb.support.end());
  std::sort(support.begin(), support.end());
  const auto rows = support.size();
  const int32_t dim = fa.dim + fb.dim;
  std::vector<double> cols(rows * static_cast<std::size_t>(dim), 0.0);
  auto row_of = [&](int32_t amb) {
    return static_cast<std::size_t>(
        std::lower_bound(support.begin(), support.end(), amb) - support.begin());
  };
  for (std::size_t r = 0; r < fa.support.size(); ++r)
    for (int32_t j = 0; j < fa.dim; ++j)
      cols[row_of(fa.support[r]) * dim + static_cast<std::size_t>(j)] =
          fa.cols[r * static_cast<std::size_t>(fa.dim) + static_cast<std::size_t>(j)];
  for (std::size_t r = 0; r < fb.support.size(); ++r)
    for (int32_t j = 0; j < fb.dim; ++j)
      cols[row_of(fb.support[r]) * dim + static_cast<std::size_t>(fa.dim + j)] =
          fb.cols[r * static_cast<std::size_t>(fb.dim) + static_cast<std::size_t>(j)];

  std::vector<double> center(p.grid.center);
  center.insert(center.end(), q.grid.center.begin(), q.grid.center.end());
  std::vector<double> half(p.grid.half);
  half.insert(half.end(), q.grid.half.begin(), q.grid.half.end());
  std::vector<int32_t> dims(p.grid.dims);
  dims.insert(dims.end(), q.grid.dims.begin(), q.grid.dims.end());

  CombinatorialIndexPair out;
  out.grid = CubicalGrid::make(Frame::from_columns(std::move(support),
                                                   std::move(cols), dim),
                               std::move(center), std::move(half),
                               std::move(dims));

  const int64_t qtotal = q.grid.total_cubes();
  auto pack = [&](int64_t a, int64_t b) { return a * qtotal + b; };
  for (int64_t a : p.p1)
    for (int64_t b : q.p1) out.p1.push_back(pack(a, b));
  for (int64_t a : p.p1)
    for (int64_t b : q.p0) out.p0.push_back(pack(a, b));
  for (int64_t a : p.p0)
    for (int64_t b : q.p1) out.p0.push_back(pack(a, b));
  for (int64_t a : p.s)
    for (int64_t b : q.s) out.s.push_back(pack(a, b));
  sort_unique(out.p1);
  sort_unique(out.p0);
  sort_unique(out.s);
  return out;
}

}  // namespace conley
