#include "conley/problem.hpp"

#include <algorithm>
#include <cctype>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "conley/errors.hpp"

namespace conley {
namespace {

std::string_view trim(std::string_view s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  size_t start = 0;
  for (size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j])))
      ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_double(std::string_view tok, int line) {
  std::string buf(tok);
  char* end = nullptr;
  double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size() || buf.empty()) {
    throw ParseError("not a number: '" + buf + "'", line);
  }
  return v;
}

int32_t parse_int(std::string_view tok, int line) {
  std::string buf(tok);
  char* end = nullptr;
  long v = std::strtol(buf.c_str(), &end, 10);
  if (end != buf.c_str() + buf.size() || buf.empty()) {
    throw ParseError("not an integer: '" + buf + "'", line);
  }
  return static_cast<int32_t>(v);
}

bool parse_bool(std::string_view tok, int line) {
  if (tok == "true") return true;
  if (tok == "false") return false;
  throw ParseError("expected true or false, got '" + std::string(tok) + "'",
                   line);
}

std::vector<double> parse_doubles(std::string_view v, int line) {
  std::vector<double> out;
  for (auto t : tokens(v)) out.push_back(parse_double(t, line));
  return out;
}

std::vector<int32_t> parse_ints(std::string_view v, int line) {
  std::vector<int32_t> out;
  for (auto t : tokens(v)) out.push_back(parse_int(t, line));
  return out;
}

// Rows separated by ';', entries by whitespace; all rows equally long.
std::vector<double> parse_matrix(std::string_view v, int line, size_t* rows,
                                 size_t* cols) {
  std::vector<double> out;
  *rows = 0;
  *cols = 0;
  for (auto row : split(v, ';')) {
    auto vals = parse_doubles(row, line);
    if (*rows == 0) {
      *cols = vals.size();
    } else if (vals.size() != *cols) {
      throw ParseError("ragged matrix row", line);
    }
    if (vals.empty()) throw ParseError("empty matrix row", line);
    out.insert(out.end(), vals.begin(), vals.end());
    ++*rows;
  }
  return out;
}

// One polynomial term: coefficient followed by factors x<i> or x<i>^<p>.
Monomial parse_term(std::string_view s, int line) {
  auto toks = tokens(s);
  if (toks.empty()) throw ParseError("empty polynomial term", line);
  Monomial m;
  m.coeff = parse_double(toks[0], line);
  for (size_t i = 1; i < toks.size(); ++i) {
    std::string_view t = toks[i];
    if (t.size() < 2 || t[0] != 'x') {
      throw ParseError("expected factor x<i> or x<i>^<p>, got '" +
                           std::string(t) + "'",
                       line);
    }
    size_t caret = t.find('^');
    int32_t var = parse_int(t.substr(1, caret == std::string_view::npos
                                            ? std::string_view::npos
                                            : caret - 1),
                            line);
    int32_t pow = 1;
    if (caret != std::string_view::npos) {
      pow = parse_int(t.substr(caret + 1), line);
    }
    if (var < 0 || pow < 1) throw ParseError("bad factor", line);
    bool merged = false;
    for (auto& f : m.factors) {
      if (f.first == var) {
        f.second += pow;
        merged = true;
        break;
      }
    }
    if (!merged) m.factors.emplace_back(var, pow);
  }
  std::sort(m.factors.begin(), m.factors.end());
  return m;
}

// component = <output> : <term> ; <term> ; ...
std::pair<int32_t, Poly> parse_component(std::string_view v, int line) {
  size_t colon = v.find(':');
  if (colon == std::string_view::npos) {
    throw ParseError("component needs '<output> : <terms>'", line);
  }
  int32_t out = parse_int(trim(v.substr(0, colon)), line);
  if (out < 0) throw ParseError("negative output index", line);
  Poly p;
  for (auto term : split(v.substr(colon + 1), ';')) {
    p.add_term(parse_term(term, line));
  }
  return {out, p};
}

DecayTerm parse_decay(std::string_view v, int line) {
  auto toks = tokens(v);
  if (toks.size() != 3) {
    throw ParseError("decay term needs '<kind> <coeff> <param>'", line);
  }
  DecayTerm t;
  if (toks[0] == "geometric") {
    t.kind = DecayTerm::Kind::Geometric;
  } else if (toks[0] == "power") {
    t.kind = DecayTerm::Kind::Power;
  } else {
    throw ParseError("decay kind must be geometric or power", line);
  }
  t.coeff = parse_double(toks[1], line);
  t.param = parse_double(toks[2], line);
  return t;
}

// rotated = <label> : <support ints> : <row ; row ; ...>
RotatedFrameSpec parse_rotated(std::string_view v, int line) {
  auto parts = split(v, ':');
  if (parts.size() != 3) {
    throw ParseError("rotated frame needs '<label> : <support> : <rows>'",
                     line);
  }
  RotatedFrameSpec r;
  r.label = std::string(parts[0]);
  if (r.label.empty()) throw ParseError("empty frame label", line);
  r.support = parse_ints(parts[1], line);
  size_t rows = 0, cols = 0;
  r.rows = parse_matrix(parts[2], line, &rows, &cols);
  if (rows != r.support.size()) {
    throw ParseError("frame rows must match the support size", line);
  }
  r.dim = static_cast<int32_t>(cols);
  return r;
}

struct KeyState {
  std::set<std::string> seen;
  void once(const std::string& key, int line) {
    if (!seen.insert(key).second) {
      throw ParseError("duplicate key '" + key + "'", line);
    }
  }
};

void fmt_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

void fmt_list(std::string& out, const std::vector<double>& v) {
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    fmt_double(out, v[i]);
  }
}

void fmt_ints(std::string& out, const std::vector<int32_t>& v) {
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(v[i]);
  }
}

void fmt_matrix(std::string& out, const std::vector<double>& m, size_t rows,
                size_t cols) {
  for (size_t r = 0; r < rows; ++r) {
    if (r) out += " ; ";
    for (size_t c = 0; c < cols; ++c) {
      if (c) out += ' ';
      fmt_double(out, m[r * cols + c]);
    }
  }
}

void fmt_poly(std::string& out, const Poly& p) {
  for (size_t i = 0; i < p.terms.size(); ++i) {
    if (i) out += " ; ";
    const Monomial& m = p.terms[i];
    fmt_double(out, m.coeff);
    for (auto [var, pow] : m.factors) {
      out += " x" + std::to_string(var);
      if (pow != 1) out += "^" + std::to_string(pow);
    }
  }
}

bool power_of_two(int32_t n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

ProblemSpec parse_problem(std::string_view text) {
  ProblemSpec spec;
  std::string section;
  KeyState seen;
  bool tail_plus_set = false, tail_minus_set = false;

  int line = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view raw = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line;

    size_t hash = raw.find('#');
    if (hash != std::string_view::npos) raw = raw.substr(0, hash);
    std::string_view ln = trim(raw);
    if (ln.empty()) continue;

    if (ln.front() == '[') {
      if (ln.back() != ']') throw ParseError("unterminated section", line);
      section = std::string(trim(ln.substr(1, ln.size() - 2)));
      static const std::set<std::string> known = {
          "operator", "nonlinearity", "neighborhood", "subspaces",
          "budgets",  "grid",         "flow"};
      if (!known.count(section)) {
        throw ParseError("unknown section [" + section + "]", line);
      }
      continue;
    }

    size_t eq = ln.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("expected 'key = value'", line);
    }
    std::string key(trim(ln.substr(0, eq)));
    std::string_view value = trim(ln.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", line);
    if (section.empty()) {
      throw ParseError("key '" + key + "' outside any section", line);
    }
    std::string qual = section + "." + key;

    if (section == "operator") {
      if (key == "core_diagonal") {
        seen.once(qual, line);
        spec.core_diagonal = parse_doubles(value, line);
      } else if (key == "core_perturbation") {
        seen.once(qual, line);
        size_t rows = 0, cols = 0;
        spec.core_perturbation = parse_matrix(value, line, &rows, &cols);
        if (rows != cols) {
          throw ParseError("core_perturbation must be square", line);
        }
      } else if (key == "tail_plus") {
        seen.once(qual, line);
        spec.tail_plus = parse_double(value, line);
        tail_plus_set = true;
      } else if (key == "tail_minus") {
        seen.once(qual, line);
        spec.tail_minus = parse_double(value, line);
        tail_minus_set = true;
      } else if (key == "single_tail") {
        seen.once(qual, line);
        spec.single_tail = parse_bool(value, line);
      } else if (key == "declared_gap") {
        seen.once(qual, line);
        spec.declared_gap = parse_double(value, line);
      } else {
        throw ParseError("unknown key '" + qual + "'", line);
      }
    } else if (section == "nonlinearity") {
      if (key == "input_support") {
        seen.once(qual, line);
        spec.input_support = parse_ints(value, line);
      } else if (key == "component") {
        spec.components.push_back(parse_component(value, line));
      } else if (key == "cutoff_radius") {
        seen.once(qual, line);
        spec.cutoff_radius = parse_double(value, line);
      } else if (key == "diagonal_compact") {
        spec.diagonal_compact.terms.push_back(parse_decay(value, line));
      } else {
        throw ParseError("unknown key '" + qual + "'", line);
      }
    } else if (section == "neighborhood") {
      if (key == "ball_radius") {
        seen.once(qual, line);
        spec.neighborhood = Neighborhood::ball(parse_double(value, line));
      } else if (key == "box_lo") {
        seen.once(qual, line);
        spec.neighborhood.is_ball = false;
        spec.neighborhood.radius = 0.0;
        spec.neighborhood.lo = parse_doubles(value, line);
      } else if (key == "box_hi") {
        seen.once(qual, line);
        spec.neighborhood.is_ball = false;
        spec.neighborhood.radius = 0.0;
        spec.neighborhood.hi = parse_doubles(value, line);
      } else {
        throw ParseError("unknown key '" + qual + "'", line);
      }
    } else if (section == "subspaces") {
      if (key == "ladder") {
        seen.once(qual, line);
        spec.ladder = parse_ints(value, line);
      } else if (key == "rotated") {
        spec.rotated.push_back(parse_rotated(value, line));
      } else {
        throw ParseError("unknown key '" + qual + "'", line);
      }
    } else if (section == "budgets") {
      if (key == "c1") {
        seen.once(qual, line);
        spec.budget_c1 = parse_double(value, line);
      } else if (key == "c2") {
        seen.once(qual, line);
        spec.budget_c2 = parse_double(value, line);
      } else if (key == "degeneracy_tol") {
        seen.once(qual, line);
        spec.degeneracy_tol = parse_double(value, line);
      } else {
        throw ParseError("unknown key '" + qual + "'", line);
      }
    } else if (section == "grid") {
      if (key == "subdivisions") {
        seen.once(qual, line);
        spec.grid.subdivisions = parse_ints(value, line);
      } else if (key == "margin") {
        seen.once(qual, line);
        spec.grid.margin = parse_int(value, line);
      } else if (key == "max_refinements") {
        seen.once(qual, line);
        spec.grid.max_refinements = parse_int(value, line);
      } else {
        throw ParseError("unknown key '" + qual + "'", line);
      }
    } else if (section == "flow") {
      if (key == "tau") {
        seen.once(qual, line);
        spec.flow.tau = parse_double(value, line);
      } else if (key == "tol") {
        seen.once(qual, line);
        spec.flow.tol = parse_double(value, line);
      } else if (key == "box_scale") {
        seen.once(qual, line);
        spec.flow.box_scale = parse_double(value, line);
      } else {
        throw ParseError("unknown key '" + qual + "'", line);
      }
    }
  }

  // A ball line may be followed by nothing else; a box needs both bounds.
  if (!spec.neighborhood.is_ball &&
      (spec.neighborhood.lo.empty() || spec.neighborhood.hi.empty())) {
    throw ParseError("box neighborhood needs both box_lo and box_hi", line);
  }
  (void)tail_plus_set;
  (void)tail_minus_set;
  return spec;
}

ProblemSpec load_problem(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read problem file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_problem(buf.str());
}

PermissibleField ProblemSpec::field() const {
  SpectralOperator L =
      SpectralOperator::make(core_diagonal, core_perturbation, tail_plus,
                             tail_minus, single_tail, declared_gap);
  StructuredCompactMap Q = StructuredCompactMap::zero();
  if (!components.empty() || !diagonal_compact.is_zero()) {
    std::vector<int32_t> support = input_support;
    if (support.empty()) {
      std::set<int32_t> vars;
      for (const auto& [out, p] : components) {
        for (int32_t v : p.variables()) vars.insert(v);
      }
      support.assign(vars.begin(), vars.end());
    }
    Q = StructuredCompactMap::make(support, components, cutoff_radius,
                                   diagonal_compact);
  }
  return PermissibleField::make(std::move(L), std::move(Q));
}

AdmissibilityBudget ProblemSpec::budget() const {
  return AdmissibilityBudget::make(budget_c1, budget_c2, degeneracy_tol);
}

std::vector<std::pair<std::string, Frame>> ProblemSpec::frames() const {
  std::vector<std::pair<std::string, Frame>> out;
  for (int32_t d : ladder) {
    std::vector<int32_t> idx(d);
    for (int32_t i = 0; i < d; ++i) idx[i] = i;
    out.emplace_back("V" + std::to_string(d),
                     Frame::coordinate_span(std::move(idx)));
  }
  for (const auto& r : rotated) {
    out.emplace_back(r.label, Frame::from_columns(r.support, r.rows, r.dim));
  }
  return out;
}

void validate_problem(const ProblemSpec& spec) {
  std::vector<std::string> bad;
  auto fail = [&](const std::string& m) { bad.push_back(m); };

  size_t n = spec.core_diagonal.size();
  if (n == 0) fail("operator: core_diagonal is empty");
  if (!spec.core_perturbation.empty() && spec.core_perturbation.size() != n * n)
    fail("operator: core_perturbation is not core_dim x core_dim");

  bool field_ok = false;
  if (bad.empty()) {
    try {
      (void)spec.field();
      field_ok = true;
    } catch (const Error& e) {
      fail(std::string("field: ") + e.what());
    }
  }

  if (!spec.components.empty() && spec.cutoff_radius <= 0.0)
    fail("nonlinearity: components need cutoff_radius > 0");

  const Neighborhood& X = spec.neighborhood;
  if (X.is_ball) {
    if (!(X.radius > 0.0)) fail("neighborhood: ball_radius must be > 0");
  } else {
    if (X.lo.size() != X.hi.size())
      fail("neighborhood: box_lo and box_hi lengths differ");
    for (size_t i = 0; i < std::min(X.lo.size(), X.hi.size()); ++i) {
      if (!(X.lo[i] < 0.0 && 0.0 < X.hi[i]))
        fail("neighborhood: box must contain the origin in its interior");
    }
  }

  if (spec.ladder.empty() && spec.rotated.empty())
    fail("subspaces: no ladder and no rotated frames");
  for (size_t i = 0; i < spec.ladder.size(); ++i) {
    if (spec.ladder[i] < 1) fail("subspaces: ladder dims must be >= 1");
    if (i > 0 && spec.ladder[i] <= spec.ladder[i - 1])
      fail("subspaces: ladder dims must be strictly increasing");
  }
  std::set<std::string> labels;
  for (const auto& r : spec.rotated) {
    if (!labels.insert(r.label).second)
      fail("subspaces: duplicate frame label '" + r.label + "'");
    try {
      (void)Frame::from_columns(r.support, r.rows, r.dim);
    } catch (const Error& e) {
      fail("subspaces: frame '" + r.label + "': " + e.what());
    }
  }
  if (!X.is_ball) {
    for (int32_t d : spec.ladder) {
      if (static_cast<size_t>(d) != X.lo.size())
        fail("neighborhood: box dimension differs from ladder frame V" +
             std::to_string(d));
    }
    for (const auto& r : spec.rotated) {
      if (static_cast<size_t>(r.dim) != X.lo.size())
        fail("neighborhood: box dimension differs from frame '" + r.label +
             "'");
    }
  }

  if (spec.budget_c1 < 0.0) fail("budgets: c1 must be >= 0");
  if (spec.budget_c2 < 0.0) fail("budgets: c2 must be >= 0");
  if (!(spec.degeneracy_tol > 0.0)) fail("budgets: degeneracy_tol must be > 0");
  if (field_ok && spec.budget_c1 >= 0.0 && spec.budget_c2 >= 0.0 &&
      spec.degeneracy_tol > 0.0) {
    try {
      (void)spec.budget();
    } catch (const Error& e) {
      fail(std::string("budgets: ") + e.what());
    }
  }

  if (spec.grid.subdivisions.empty()) {
    fail("grid: subdivisions is empty");
  } else {
    for (int32_t s : spec.grid.subdivisions) {
      if (!power_of_two(s) || s < 8)
        fail("grid: subdivisions must be powers of two >= 8");
    }
    size_t ns = spec.grid.subdivisions.size();
    if (ns > 1) {
      for (int32_t d : spec.ladder) {
        if (static_cast<size_t>(d) != ns)
          fail("grid: per-axis subdivisions differ from ladder frame V" +
               std::to_string(d));
      }
      for (const auto& r : spec.rotated) {
        if (static_cast<size_t>(r.dim) != ns)
          fail("grid: per-axis subdivisions differ from frame '" + r.label +
               "'");
      }
    }
  }
  if (spec.grid.margin < 1) fail("grid: margin must be >= 1");
  if (spec.grid.max_refinements < 0) fail("grid: max_refinements must be >= 0");

  if (!(spec.flow.tau > 0.0)) fail("flow: tau must be > 0");
  if (!(spec.flow.tol > 0.0)) fail("flow: tol must be > 0");
  if (!(spec.flow.box_scale >= 1.0)) fail("flow: box_scale must be >= 1");

  if (!bad.empty()) {
    std::string msg = "problem invalid:";
    for (const auto& m : bad) msg += "\n  - " + m;
    throw ValidationError(msg);
  }
}

std::string serialize_problem(const ProblemSpec& spec) {
  std::string out;
  out += "[operator]\n";
  out += "core_diagonal = ";
  fmt_list(out, spec.core_diagonal);
  out += '\n';
  if (!spec.core_perturbation.empty()) {
    size_t nn = spec.core_diagonal.size();
    out += "core_perturbation = ";
    fmt_matrix(out, spec.core_perturbation, nn, nn);
    out += '\n';
  }
  out += "tail_plus = ";
  fmt_double(out, spec.tail_plus);
  out += "\ntail_minus = ";
  fmt_double(out, spec.tail_minus);
  out += "\nsingle_tail = ";
  out += spec.single_tail ? "true" : "false";
  out += '\n';
  if (spec.declared_gap) {
    out += "declared_gap = ";
    fmt_double(out, *spec.declared_gap);
    out += '\n';
  }

  if (!spec.components.empty() || !spec.diagonal_compact.is_zero() ||
      !spec.input_support.empty()) {
    out += "\n[nonlinearity]\n";
    if (!spec.input_support.empty()) {
      out += "input_support = ";
      fmt_ints(out, spec.input_support);
      out += '\n';
    }
    for (const auto& [idx, p] : spec.components) {
      out += "component = " + std::to_string(idx) + " : ";
      fmt_poly(out, p);
      out += '\n';
    }
    if (spec.cutoff_radius != 0.0) {
      out += "cutoff_radius = ";
      fmt_double(out, spec.cutoff_radius);
      out += '\n';
    }
    for (const auto& t : spec.diagonal_compact.terms) {
      out += "diagonal_compact = ";
      out += t.kind == DecayTerm::Kind::Geometric ? "geometric " : "power ";
      fmt_double(out, t.coeff);
      out += ' ';
      fmt_double(out, t.param);
      out += '\n';
    }
  }

  out += "\n[neighborhood]\n";
  if (spec.neighborhood.is_ball) {
    out += "ball_radius = ";
    fmt_double(out, spec.neighborhood.radius);
    out += '\n';
  } else {
    out += "box_lo = ";
    fmt_list(out, spec.neighborhood.lo);
    out += "\nbox_hi = ";
    fmt_list(out, spec.neighborhood.hi);
    out += '\n';
  }

  out += "\n[subspaces]\n";
  if (!spec.ladder.empty()) {
    out += "ladder = ";
    fmt_ints(out, spec.ladder);
    out += '\n';
  }
  for (const auto& r : spec.rotated) {
    out += "rotated = " + r.label + " : ";
    fmt_ints(out, r.support);
    out += " : ";
    fmt_matrix(out, r.rows, r.support.size(), static_cast<size_t>(r.dim));
    out += '\n';
  }

  out += "\n[budgets]\nc1 = ";
  fmt_double(out, spec.budget_c1);
  out += "\nc2 = ";
  fmt_double(out, spec.budget_c2);
  out += "\ndegeneracy_tol = ";
  fmt_double(out, spec.degeneracy_tol);
  out += '\n';

  out += "\n[grid]\nsubdivisions = ";
  fmt_ints(out, spec.grid.subdivisions);
  out += "\nmargin = " + std::to_string(spec.grid.margin);
  out += "\nmax_refinements = " + std::to_string(spec.grid.max_refinements);
  out += '\n';

  out += "\n[flow]\ntau = ";
  fmt_double(out, spec.flow.tau);
  out += "\ntol = ";
  fmt_double(out, spec.flow.tol);
  out += "\nbox_scale = ";
  fmt_double(out, spec.flow.box_scale);
  out += '\n';
  return out;
}

}  // namespace conley
