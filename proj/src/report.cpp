#include "conley/report.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "conley/errors.hpp"
#include "conley/flow.hpp"
#include "conley/sha256.hpp"

namespace conley {
namespace {

using json = nlohmann::ordered_json;

FrameOutcome outcome_from_assembly(const std::string& label,
                                   const AssemblyResult& ar) {
  FrameOutcome f;
  f.label = label;
  f.dim = ar.sig.v.dim;
  f.ok = true;
  f.admissibility = ar.admissibility;
  f.block_spectrum = ar.sig.eigen_minus;
  f.block_spectrum.insert(f.block_spectrum.end(), ar.sig.eigen_zero.begin(),
                          ar.sig.eigen_zero.end());
  f.block_spectrum.insert(f.block_spectrum.end(), ar.sig.eigen_plus.begin(),
                          ar.sig.eigen_plus.end());
  std::sort(f.block_spectrum.begin(), f.block_spectrum.end());
  f.shift = ar.index.shift;
  f.entries = ar.index.entries;
  f.refinements = ar.refinements;
  f.subdivisions = ar.pair.grid.dims;
  f.region_cubes = static_cast<int64_t>(ar.region.size());
  f.invariant_cubes = static_cast<int64_t>(ar.pair.s.size());
  f.p1_cubes = static_cast<int64_t>(ar.pair.p1.size());
  f.p0_cubes = static_cast<int64_t>(ar.pair.p0.size());
  f.box_center = ar.pair.grid.center;
  f.box_half = ar.pair.grid.half;
  f.grid_dims = ar.pair.grid.dims;
  if (f.dim == 2) {
    f.p1_ids = ar.pair.p1;
    f.p0_ids = ar.pair.p0;
  }
  return f;
}

json outcome_to_json(const FrameOutcome& f) {
  json j;
  j["label"] = f.label;
  j["dim"] = f.dim;
  j["ok"] = f.ok;
  j["error"] = f.error;
  j["admissibility"] = {{"ok", f.admissibility.ok},
                        {"kernel_ok", f.admissibility.kernel_ok},
                        {"commutator_ok", f.admissibility.commutator_ok},
                        {"residual_ok", f.admissibility.residual_ok},
                        {"kernel_defect", f.admissibility.kernel_defect},
                        {"commutator", f.admissibility.commutator},
                        {"residual_upper", f.admissibility.residual_upper},
                        {"residual_lower", f.admissibility.residual_lower}};
  j["block_spectrum"] = f.block_spectrum;
  j["shift"] = f.shift;
  json entries = json::array();
  for (const auto& e : f.entries) {
    entries.push_back({{"virtual_degree", e.virtual_degree},
                       {"rank", e.rank},
                       {"torsion", e.torsion}});
  }
  j["entries"] = std::move(entries);
  j["refinements"] = f.refinements;
  j["subdivisions"] = f.subdivisions;
  j["region_cubes"] = f.region_cubes;
  j["invariant_cubes"] = f.invariant_cubes;
  j["p1_cubes"] = f.p1_cubes;
  j["p0_cubes"] = f.p0_cubes;
  j["grid"] = {{"center", f.box_center},
               {"half", f.box_half},
               {"dims", f.grid_dims}};
  if (f.dim == 2 && f.ok) {
    j["p1_ids"] = f.p1_ids;
    j["p0_ids"] = f.p0_ids;
  }
  return j;
}

FrameOutcome outcome_from_json(const json& j) {
  FrameOutcome f;
  f.label = j.at("label").get<std::string>();
  f.dim = j.at("dim").get<int32_t>();
  f.ok = j.at("ok").get<bool>();
  f.error = j.at("error").get<std::string>();
  const json& a = j.at("admissibility");
  f.admissibility.ok = a.at("ok").get<bool>();
  f.admissibility.kernel_ok = a.at("kernel_ok").get<bool>();
  f.admissibility.commutator_ok = a.at("commutator_ok").get<bool>();
  f.admissibility.residual_ok = a.at("residual_ok").get<bool>();
  f.admissibility.kernel_defect = a.at("kernel_defect").get<double>();
  f.admissibility.commutator = a.at("commutator").get<double>();
  f.admissibility.residual_upper = a.at("residual_upper").get<double>();
  f.admissibility.residual_lower = a.at("residual_lower").get<double>();
  f.block_spectrum = j.at("block_spectrum").get<std::vector<double>>();
  f.shift = j.at("shift").get<int32_t>();
  for (const json& e : j.at("entries")) {
    StableEntry s;
    s.virtual_degree = e.at("virtual_degree").get<int32_t>();
    s.rank = e.at("rank").get<int64_t>();
    s.torsion = e.at("torsion").get<std::vector<int64_t>>();
    f.entries.push_back(std::move(s));
  }
  f.refinements = j.at("refinements").get<int32_t>();
  f.subdivisions = j.at("subdivisions").get<std::vector<int32_t>>();
  f.region_cubes = j.at("region_cubes").get<int64_t>();
  f.invariant_cubes = j.at("invariant_cubes").get<int64_t>();
  f.p1_cubes = j.at("p1_cubes").get<int64_t>();
  f.p0_cubes = j.at("p0_cubes").get<int64_t>();
  const json& g = j.at("grid");
  f.box_center = g.at("center").get<std::vector<double>>();
  f.box_half = g.at("half").get<std::vector<double>>();
  f.grid_dims = g.at("dims").get<std::vector<int32_t>>();
  if (j.contains("p1_ids")) {
    f.p1_ids = j.at("p1_ids").get<std::vector<int64_t>>();
    f.p0_ids = j.at("p0_ids").get<std::vector<int64_t>>();
  }
  return f;
}

// Problem text restricted to one frame; two problems differing only in
// unrelated frames share per-frame cache entries.
std::string frame_cache_key(const ProblemSpec& spec, size_t frame_index) {
  ProblemSpec one = spec;
  one.ladder.clear();
  one.rotated.clear();
  if (frame_index < spec.ladder.size()) {
    one.ladder.push_back(spec.ladder[frame_index]);
  } else {
    one.rotated.push_back(spec.rotated[frame_index - spec.ladder.size()]);
  }
  return sha256_hex(serialize_problem(one));
}

const char* cache_dir() {
  const char* d = std::getenv("CONLEY_CACHE_DIR");
  return (d && *d) ? d : nullptr;
}

bool cache_load(const std::string& path, FrameOutcome* out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  try {
    json j = json::parse(in);
    *out = outcome_from_json(j);
    out->cache_hit = true;
    return true;
  } catch (...) {
    return false;
  }
}

void cache_store(const std::string& path, const FrameOutcome& f) {
  std::error_code ec;
  std::filesystem::create_directories(
      std::filesystem::path(path).parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::fprintf(stderr, "cache: cannot write %s\n", path.c_str());
    return;
  }
  out << outcome_to_json(f).dump(2) << '\n';
}

void fmt17(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string entries_compact(const std::vector<StableEntry>& entries) {
  std::string out;
  for (size_t i = 0; i < entries.size(); ++i) {
    if (i) out += '|';
    out += std::to_string(entries[i].virtual_degree) + ":" +
           std::to_string(entries[i].rank);
    if (!entries[i].torsion.empty()) {
      out += '[';
      for (size_t t = 0; t < entries[i].torsion.size(); ++t) {
        if (t) out += ',';
        out += std::to_string(entries[i].torsion[t]);
      }
      out += ']';
    }
  }
  return out;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

}  // namespace

RunReport run_ladder(const ProblemSpec& spec, const std::string& label) {
  RunReport rep;
  rep.problem_label = label;
  rep.content_hash = sha256_hex(serialize_problem(spec));

  PermissibleField F = spec.field();
  AdmissibilityBudget budget = spec.budget();
  auto frames = spec.frames();

  // Cache hits resolve up front; each remaining frame runs as its own task.
  // Everything below the joins (timing lines, cache writes, the merge, the
  // equality matrix) is sequential in frame order, so output is
  // deterministic regardless of task scheduling.
  const char* cdir = cache_dir();
  const size_t n_frames = frames.size();
  std::vector<FrameOutcome> out(n_frames);
  std::vector<std::string> cpath(n_frames);
  std::vector<long long> ms(n_frames, -1);
  std::vector<size_t> pending;
  int hits = 0;
  for (size_t i = 0; i < n_frames; ++i) {
    if (cdir) {
      cpath[i] = std::string(cdir) + "/" + frame_cache_key(spec, i) + ".json";
      if (cache_load(cpath[i], &out[i])) {
        ++hits;
        continue;
      }
    }
    pending.push_back(i);
  }

  auto run_one = [&](size_t i) {
    const auto& [flabel, V] = frames[i];
    auto t0 = std::chrono::steady_clock::now();
    FrameOutcome f;
    try {
      AssemblyResult ar = assemble_stable_index(F, spec.neighborhood, V,
                                                budget, spec.grid, spec.flow,
                                                flabel);
      f = outcome_from_assembly(flabel, ar);
    } catch (const Error& e) {
      f.label = flabel;
      f.dim = V.dim;
      f.ok = false;
      f.error = e.what();
    }
    auto t1 = std::chrono::steady_clock::now();
    ms[i] = static_cast<long long>(
        std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0)
            .count());
    out[i] = std::move(f);
  };

  if (pending.size() > 1) {
    std::vector<std::future<void>> tasks;
    tasks.reserve(pending.size());
    for (size_t i : pending)
      tasks.push_back(std::async(std::launch::async, run_one, i));
    for (auto& t : tasks) t.get();
  } else if (pending.size() == 1) {
    run_one(pending.front());
  }

  for (size_t i = 0; i < n_frames; ++i) {
    if (ms[i] >= 0) {
      std::fprintf(stderr, "timing: %s %lld ms\n", out[i].label.c_str(),
                   ms[i]);
      if (cdir) cache_store(cpath[i], out[i]);
    }
    rep.frames.push_back(std::move(out[i]));
  }
  if (cdir) {
    std::fprintf(stderr, "cache: %d hits, %zu misses\n", hits,
                 pending.size());
  }

  size_t n = rep.frames.size();
  rep.equal.assign(n, std::vector<int8_t>(n, -1));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      if (rep.frames[i].ok && rep.frames[j].ok) {
        rep.equal[i][j] =
            rep.frames[i].entries == rep.frames[j].entries ? 1 : 0;
      }
    }
  }
  return rep;
}

SweepReport continuation_sweep(const ProblemSpec& a, const ProblemSpec& b,
                               int32_t steps, const std::string& label) {
  if (steps < 2) throw ValidationError("sweep needs at least 2 steps");
  SweepReport s;
  s.problem_label = label;
  s.steps = steps;

  PermissibleField fa = a.field();
  PermissibleField fb = b.field();
  auto frames = a.frames();
  if (frames.empty()) throw ValidationError("sweep: problem has no frames");
  const auto& [flabel, V] = frames.front();

  s.rho = decomposition_pseudometric(fa, fb,
                                     a.neighborhood.bounding_radius(V.dim));
  try {
    ContinuationReport rep = continuation_check(
        fa, fb, a.neighborhood, V, steps,
        std::numeric_limits<double>::infinity(), a.budget(), a.grid, a.flow);
    s.completed = true;
    s.trace = rep.steps;
    s.ends_equal = rep.ends_equal;
    s.start = outcome_from_assembly(flabel + "@start", rep.start);
    s.end = outcome_from_assembly(flabel + "@end", rep.end);
  } catch (const ContinuationBreakError& e) {
    s.completed = false;
    s.break_lo = e.s_lo;
    s.break_hi = e.s_hi;
    s.break_message = e.what();
  }
  return s;
}

ReportFormat parse_format(const std::string& name) {
  if (name == "json") return ReportFormat::Json;
  if (name == "csv") return ReportFormat::Csv;
  if (name == "svg") return ReportFormat::Svg;
  throw ValidationError("unknown format '" + name + "'");
}

std::string report_json(const RunReport& r) {
  json j;
  j["problem"] = r.problem_label;
  j["content_hash"] = r.content_hash;
  json frames = json::array();
  for (const auto& f : r.frames) frames.push_back(outcome_to_json(f));
  j["frames"] = std::move(frames);
  json eq = json::array();
  for (const auto& row : r.equal) {
    json jr = json::array();
    for (int8_t v : row) {
      if (v < 0) {
        jr.push_back(nullptr);
      } else {
        jr.push_back(v == 1);
      }
    }
    eq.push_back(std::move(jr));
  }
  j["stable_equal"] = std::move(eq);
  return j.dump(2) + "\n";
}

std::string report_csv(const RunReport& r) {
  std::string out =
      "label,dim,ok,admissible,kernel_defect,commutator,residual_upper,"
      "residual_lower,shift,refinements,subdivisions,region_cubes,"
      "invariant_cubes,p1_cubes,p0_cubes,entries,error\n";
  for (const auto& f : r.frames) {
    out += csv_escape(f.label);
    out += ',' + std::to_string(f.dim);
    out += f.ok ? ",true" : ",false";
    out += f.admissibility.ok ? ",true," : ",false,";
    fmt17(out, f.admissibility.kernel_defect);
    out += ',';
    fmt17(out, f.admissibility.commutator);
    out += ',';
    fmt17(out, f.admissibility.residual_upper);
    out += ',';
    fmt17(out, f.admissibility.residual_lower);
    out += ',' + std::to_string(f.shift);
    out += ',' + std::to_string(f.refinements);
    out += ',';
    for (size_t i = 0; i < f.subdivisions.size(); ++i) {
      if (i) out += 'x';
      out += std::to_string(f.subdivisions[i]);
    }
    out += ',' + std::to_string(f.region_cubes);
    out += ',' + std::to_string(f.invariant_cubes);
    out += ',' + std::to_string(f.p1_cubes);
    out += ',' + std::to_string(f.p0_cubes);
    out += ',' + csv_escape(entries_compact(f.entries));
    out += ',' + csv_escape(f.error);
    out += '\n';
  }
  return out;
}

std::string sweep_json(const SweepReport& r) {
  json j;
  j["problem"] = r.problem_label;
  j["mode"] = "sweep";
  j["rho"] = r.rho;
  j["steps"] = r.steps;
  j["completed"] = r.completed;
  if (r.completed) {
    j["break"] = nullptr;
    json trace = json::array();
    for (const auto& st : r.trace) {
      trace.push_back({{"s", st.s},
                       {"isolated", st.isolated},
                       {"invariant_cubes", st.invariant_cubes}});
    }
    j["trace"] = std::move(trace);
    j["ends_equal"] = r.ends_equal;
    j["start"] = outcome_to_json(r.start);
    j["end"] = outcome_to_json(r.end);
  } else {
    j["break"] = {{"lo", r.break_lo},
                  {"hi", r.break_hi},
                  {"message", r.break_message}};
    j["trace"] = json::array();
    j["ends_equal"] = false;
    j["start"] = nullptr;
    j["end"] = nullptr;
  }
  return j.dump(2) + "\n";
}

std::string sweep_csv(const SweepReport& r) {
  std::string out = "s,isolated,invariant_cubes\n";
  for (const auto& st : r.trace) {
    fmt17(out, st.s);
    out += st.isolated ? ",true," : ",false,";
    out += std::to_string(st.invariant_cubes);
    out += '\n';
  }
  return out;
}

std::string frame_svg(const FrameOutcome& f) {
  if (f.grid_dims.size() != 2 || f.p1_ids.empty()) {
    throw ValidationError("svg needs a two-dimensional frame with cube data");
  }
  const double w0 = 2.0 * f.box_half[0], w1 = 2.0 * f.box_half[1];
  const double lo0 = f.box_center[0] - f.box_half[0];
  const double hi1 = f.box_center[1] + f.box_half[1];
  const int margin = 24;
  const int width = 640;
  const double sx = (width - 2.0 * margin) / w0;
  const int height = static_cast<int>((width - 2 * margin) * w1 / w0) +
                     2 * margin;
  const double sy = (height - 2.0 * margin) / w1;
  const double cw0 = w0 / f.grid_dims[0];
  const double cw1 = w1 / f.grid_dims[1];

  auto px = [&](double x) { return margin + (x - lo0) * sx; };
  auto py = [&](double y) { return margin + (hi1 - y) * sy; };
  char buf[256];
  std::string svg;
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" "
                "height=\"%d\" viewBox=\"0 0 %d %d\">\n",
                width, height, width, height);
  svg += buf;
  std::snprintf(buf, sizeof buf,
                "<rect x=\"0\" y=\"0\" width=\"%d\" height=\"%d\" "
                "fill=\"#ffffff\"/>\n",
                width, height);
  svg += buf;

  auto rects = [&](const std::vector<int64_t>& ids, const char* fill,
                   const std::vector<int64_t>& skip) {
    for (int64_t id : ids) {
      if (!skip.empty() &&
          std::binary_search(skip.begin(), skip.end(), id)) {
        continue;
      }
      int64_t i = id / f.grid_dims[1];
      int64_t jj = id % f.grid_dims[1];
      double x0 = lo0 + static_cast<double>(i) * cw0;
      double y1 = f.box_center[1] - f.box_half[1] +
                  static_cast<double>(jj + 1) * cw1;
      std::snprintf(buf, sizeof buf,
                    "<rect x=\"%.3f\" y=\"%.3f\" width=\"%.3f\" "
                    "height=\"%.3f\" fill=\"%s\"/>\n",
                    px(x0), py(y1), cw0 * sx, cw1 * sy, fill);
      svg += buf;
    }
  };
  rects(f.p1_ids, "#bcd2ee", f.p0_ids);
  rects(f.p0_ids, "#3a4a8a", {});

  std::snprintf(buf, sizeof buf,
                "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" "
                "fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n",
                margin, margin, width - 2 * margin, height - 2 * margin);
  svg += buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"%d\" y=\"%d\" font-family=\"monospace\" "
                "font-size=\"12\" fill=\"#333333\">%s</text>\n",
                margin, margin - 8, f.label.c_str());
  svg += buf;
  svg += "</svg>\n";
  return svg;
}

std::vector<std::string> emit_report(const RunReport& r, ReportFormat fmt,
                                     const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  std::vector<std::string> written;
  if (fmt == ReportFormat::Json) {
    std::string p = out_dir + "/report.json";
    write_file(p, report_json(r));
    written.push_back(p);
  } else if (fmt == ReportFormat::Csv) {
    std::string p = out_dir + "/report.csv";
    write_file(p, report_csv(r));
    written.push_back(p);
  } else {
    for (const auto& f : r.frames) {
      if (f.dim == 2 && f.ok && !f.p1_ids.empty()) {
        std::string p = out_dir + "/phase_" + f.label + ".svg";
        write_file(p, frame_svg(f));
        written.push_back(p);
      } else {
        std::fprintf(stderr, "svg: skipping frame %s (no 2-d portrait)\n",
                     f.label.c_str());
      }
    }
  }
  return written;
}

std::vector<std::string> emit_sweep(const SweepReport& r, ReportFormat fmt,
                                    const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  std::vector<std::string> written;
  if (fmt == ReportFormat::Json) {
    std::string p = out_dir + "/sweep.json";
    write_file(p, sweep_json(r));
    written.push_back(p);
  } else if (fmt == ReportFormat::Csv) {
    std::string p = out_dir + "/sweep.csv";
    write_file(p, sweep_csv(r));
    written.push_back(p);
  } else {
    std::fprintf(stderr, "svg: sweep has no portrait rendering\n");
  }
  return written;
}

}  // namespace conley
