#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "conley/errors.hpp"
#include "conley/problem.hpp"
#include "conley/report.hpp"
#include "conley/subspace.hpp"

namespace {

std::string stem_of(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

conley::ProblemSpec load_checked(const std::string& path, int max_refine) {
  conley::ProblemSpec spec = conley::load_problem(path);
  conley::validate_problem(spec);
  if (max_refine >= 0) spec.grid.max_refinements = max_refine;
  return spec;
}

int cmd_validate(const std::string& path) {
  conley::validate_problem(conley::load_problem(path));
  std::printf("valid: %s\n", path.c_str());
  return 0;
}

int cmd_admissible(const std::string& path) {
  conley::ProblemSpec spec = load_checked(path, -1);
  conley::PermissibleField F = spec.field();
  conley::AdmissibilityBudget budget = spec.budget();
  for (const auto& [label, V] : spec.frames()) {
    double r_x = spec.neighborhood.bounding_radius(V.dim);
    conley::AdmissibilityReport r = conley::admissible(F, V, r_x, budget);
    std::printf(
        "%s dim=%d ok=%s kernel_defect=%.3e commutator=%.3e "
        "residual=[%.3e,%.3e]\n",
        label.c_str(), V.dim, r.ok ? "true" : "false", r.kernel_defect,
        r.commutator, r.residual_lower, r.residual_upper);
  }
  return 0;
}

int cmd_index(const std::string& path, int max_refine) {
  conley::ProblemSpec spec = load_checked(path, max_refine);
  auto frames = spec.frames();
  if (frames.empty()) throw conley::ValidationError("problem has no frames");
  const auto& [label, V] = frames.front();
  conley::AssemblyResult ar = conley::assemble_stable_index(
      spec.field(), spec.neighborhood, V, spec.budget(), spec.grid, spec.flow,
      label);
  std::printf("frame %s shift %d\n", label.c_str(), ar.index.shift);
  for (const auto& e : ar.index.entries) {
    std::string torsion;
    for (size_t t = 0; t < e.torsion.size(); ++t) {
      torsion += (t ? "," : " torsion ") + std::to_string(e.torsion[t]);
    }
    std::printf("  virtual degree %d rank %lld%s\n", e.virtual_degree,
                static_cast<long long>(e.rank), torsion.c_str());
  }
  if (ar.index.entries.empty()) std::printf("  trivial\n");
  return 0;
}

int cmd_ladder(const std::string& path, int max_refine) {
  conley::ProblemSpec spec = load_checked(path, max_refine);
  conley::RunReport rep = conley::run_ladder(spec, stem_of(path));
  std::fputs(conley::report_json(rep).c_str(), stdout);
  return 0;
}

int cmd_sweep(const std::string& path_a, const std::string& path_b, int steps,
              int max_refine, const std::string& out_dir,
              const std::string& format) {
  conley::ProblemSpec a = load_checked(path_a, max_refine);
  conley::ProblemSpec b = load_checked(path_b, max_refine);
  conley::SweepReport rep = conley::continuation_sweep(
      a, b, steps, stem_of(path_a) + "_to_" + stem_of(path_b));
  if (out_dir.empty()) {
    std::fputs(conley::sweep_json(rep).c_str(), stdout);
  } else {
    for (const auto& p :
         conley::emit_sweep(rep, conley::parse_format(format), out_dir)) {
      std::printf("wrote %s\n", p.c_str());
    }
  }
  return rep.completed ? 0 : 3;
}

int cmd_report(const std::string& path, const std::string& out_dir,
               const std::string& format, int max_refine) {
  conley::ProblemSpec spec = load_checked(path, max_refine);
  conley::RunReport rep = conley::run_ladder(spec, stem_of(path));
  for (const auto& p :
       conley::emit_report(rep, conley::parse_format(format), out_dir)) {
    std::printf("wrote %s\n", p.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stable Conley index computations on cubical grids"};
  app.require_subcommand(1);

  std::string problem, problem_b, out_dir, format = "json";
  int steps = 11;
  int max_refine = -1;

  CLI::App* validate = app.add_subcommand("validate", "check a problem file");
  validate->add_option("--problem", problem, "problem file")->required();

  CLI::App* admissible =
      app.add_subcommand("admissible", "admissibility of every frame");
  admissible->add_option("--problem", problem, "problem file")->required();

  CLI::App* index =
      app.add_subcommand("index", "stable index on the first frame");
  index->add_option("--problem", problem, "problem file")->required();
  index->add_option("--max-refine", max_refine, "refinement override");

  CLI::App* ladder =
      app.add_subcommand("ladder", "run every frame, print the JSON report");
  ladder->add_option("--problem", problem, "problem file")->required();
  ladder->add_option("--max-refine", max_refine, "refinement override");

  CLI::App* sweep =
      app.add_subcommand("sweep", "continuation sweep between two problems");
  sweep->add_option("--problem", problem, "problem file")->required();
  sweep->add_option("--problem-b", problem_b, "second problem file")
      ->required();
  sweep->add_option("--steps", steps, "parameter values including both ends");
  sweep->add_option("--max-refine", max_refine, "refinement override");
  sweep->add_option("--out", out_dir, "write files here instead of stdout");
  sweep->add_option("--format", format, "json, csv, or svg");

  CLI::App* report = app.add_subcommand("report", "write report files");
  report->add_option("--problem", problem, "problem file")->required();
  report->add_option("--out", out_dir, "output directory")->required();
  report->add_option("--format", format, "json, csv, or svg");
  report->add_option("--max-refine", max_refine, "refinement override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (validate->parsed()) return cmd_validate(problem);
    if (admissible->parsed()) return cmd_admissible(problem);
    if (index->parsed()) return cmd_index(problem, max_refine);
    if (ladder->parsed()) return cmd_ladder(problem, max_refine);
    if (sweep->parsed()) {
      return cmd_sweep(problem, problem_b, steps, max_refine, out_dir, format);
    }
    if (report->parsed()) {
      return cmd_report(problem, out_dir, format, max_refine);
    }
  } catch (const conley::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const conley::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
