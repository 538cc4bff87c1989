#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "conley/errors.hpp"
#include "conley/problem.hpp"
#include "conley/report.hpp"
#include "oracles.hpp"

using namespace conley;

namespace {

std::string g_argv0;

const std::vector<std::string>& corpus() {
  static const std::vector<std::string> names = {
      "linear6.ini",  "saddle.ini",  "repeller.ini",
      "repeller_scaled.ini", "drift_a.ini", "drift_b.ini"};
  return names;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::filesystem::path fresh_dir(const std::string& tag) {
  auto d = std::filesystem::temp_directory_path() / ("conley_test_" + tag);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("parse and serialize are inverse on the problem corpus") {
  for (const auto& name : corpus()) {
    CAPTURE(name);
    ProblemSpec spec = load_problem(testkit::problem_path(name));
    CHECK_NOTHROW(validate_problem(spec));
    std::string canon = serialize_problem(spec);
    ProblemSpec round = parse_problem(canon);
    CHECK(round == spec);
    CHECK(serialize_problem(round) == canon);
  }
}

TEST_CASE("parsed fields carry the written values") {
  ProblemSpec spec = load_problem(testkit::problem_path("linear6.ini"));
  REQUIRE(spec.core_diagonal.size() == 6);
  CHECK(spec.core_diagonal[2] == -1.75);
  CHECK(spec.tail_plus == 1.0);
  CHECK(spec.tail_minus == -1.0);
  CHECK(spec.neighborhood.is_ball);
  CHECK(spec.neighborhood.radius == 1.0);
  CHECK(spec.ladder == std::vector<int32_t>{2, 4, 6});
  CHECK(spec.budget_c1 == 0.2);
  CHECK(spec.grid.subdivisions == std::vector<int32_t>{16});
  CHECK(spec.grid.margin == 2);
  CHECK(spec.flow.tau == 0.5);
  CHECK(spec.flow.box_scale == 4.0);
  auto frames = spec.frames();
  REQUIRE(frames.size() == 3);
  CHECK(frames[0].first == "V2");
  CHECK(frames[2].second.dim == 6);

  ProblemSpec rot = load_problem(testkit::problem_path("repeller.ini"));
  auto rframes = rot.frames();
  REQUIRE(rframes.size() == 4);
  CHECK(rframes[3].first == "plane13");
  CHECK(rframes[3].second.dim == 2);
  CHECK(rframes[3].second.support == std::vector<int32_t>{0, 1, 3});
}

TEST_CASE("syntax errors carry their line numbers") {
  try {
    parse_problem("[operator]\ncore_diagonal = one two\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line_number == 2);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  try {
    parse_problem("[operator]\ncore_diagonal = 1\nwhat is this\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line_number == 3);
  }
  CHECK_THROWS_AS(parse_problem("core_diagonal = 1\n"), ParseError);
  CHECK_THROWS_AS(load_problem(testkit::problem_path("missing_file.ini")),
                  Error);
}

TEST_CASE("validation reports every violation at once") {
  ProblemSpec spec = load_problem(testkit::problem_path("linear6.ini"));
  spec.grid.subdivisions = {12};
  spec.flow.tau = 0.0;
  spec.budget_c1 = -1.0;
  try {
    validate_problem(spec);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("subdivisions") != std::string::npos);
    CHECK(msg.find("tau") != std::string::npos);
    CHECK(msg.find("c1") != std::string::npos);
  }

  ProblemSpec empty;
  CHECK_THROWS_AS(validate_problem(empty), ValidationError);
}

TEST_CASE("report format names are checked") {
  CHECK(parse_format("json") == ReportFormat::Json);
  CHECK(parse_format("csv") == ReportFormat::Csv);
  CHECK(parse_format("svg") == ReportFormat::Svg);
  CHECK_THROWS_AS(parse_format("xml"), ValidationError);
}

TEST_CASE("ladder reports are deterministic byte for byte") {
  ProblemSpec spec = load_problem(testkit::problem_path("saddle.ini"));
  RunReport r1 = run_ladder(spec, "saddle");
  RunReport r2 = run_ladder(spec, "saddle");
  CHECK(report_json(r1) == report_json(r2));
  CHECK(report_csv(r1) == report_csv(r2));
  REQUIRE(r1.frames.size() == spec.frames().size());
  CHECK(r1.frames[0].ok);
  CHECK(r1.frames[0].label == "V2");
  CHECK(r1.content_hash.size() == 64);
  REQUIRE(r1.equal.size() == r1.frames.size());
  for (size_t i = 0; i < r1.equal.size(); ++i) {
    REQUIRE(r1.equal[i].size() == r1.frames.size());
    CHECK(r1.equal[i][i] == 1);
  }
  CHECK(count_lines(report_csv(r1)) == 1 + (int)r1.frames.size());

  ProblemSpec other = load_problem(testkit::problem_path("repeller.ini"));
  RunReport r3 = run_ladder(other, "repeller");
  CHECK(r3.content_hash != r1.content_hash);
}

TEST_CASE("cache round-trips are invisible in the report bytes") {
  auto dir = fresh_dir("cache");
  setenv("CONLEY_CACHE_DIR", dir.c_str(), 1);
  ProblemSpec spec = load_problem(testkit::problem_path("saddle.ini"));
  RunReport cold = run_ladder(spec, "saddle");
  for (const auto& f : cold.frames) CHECK_FALSE(f.cache_hit);
  RunReport warm = run_ladder(spec, "saddle");
  for (const auto& f : warm.frames) CHECK(f.cache_hit);
  unsetenv("CONLEY_CACHE_DIR");
  CHECK(report_json(cold) == report_json(warm));
  CHECK(report_csv(cold) == report_csv(warm));
  RunReport off = run_ladder(spec, "saddle");
  CHECK(report_json(off) == report_json(cold));
  std::filesystem::remove_all(dir);
}

TEST_CASE("emitted files are stable and formats route correctly") {
  ProblemSpec spec = load_problem(testkit::problem_path("saddle.ini"));
  RunReport rep = run_ladder(spec, "saddle");
  auto dir = fresh_dir("emit");

  auto json_paths = emit_report(rep, ReportFormat::Json, dir.string());
  REQUIRE(json_paths.size() == 1);
  std::string j1 = slurp(json_paths[0]);
  CHECK(j1 == report_json(rep));
  CHECK(j1.find("\"content_hash\"") != std::string::npos);

  auto csv_paths = emit_report(rep, ReportFormat::Csv, dir.string());
  REQUIRE(csv_paths.size() == 1);
  CHECK(slurp(csv_paths[0]) == report_csv(rep));

  auto svg_paths = emit_report(rep, ReportFormat::Svg, dir.string());
  REQUIRE(svg_paths.size() == 1);  // the saddle frame is two-dimensional
  std::string svg = slurp(svg_paths[0]);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("rect") != std::string::npos);

  auto again = emit_report(rep, ReportFormat::Svg, dir.string());
  CHECK(slurp(again[0]) == svg);
  std::filesystem::remove_all(dir);
}

TEST_CASE("sweep reports serialize both outcomes") {
  ProblemSpec a = load_problem(testkit::problem_path("repeller.ini"));
  ProblemSpec b = load_problem(testkit::problem_path("repeller_scaled.ini"));
  SweepReport s = continuation_sweep(a, b, 5, "quick");
  CHECK(s.completed);
  CHECK(s.ends_equal);
  CHECK(s.steps == 5);
  REQUIRE(s.trace.size() == 5);
  std::string js = sweep_json(s);
  CHECK(js.find("\"completed\": true") != std::string::npos);
  CHECK(sweep_json(s) == js);
  std::string cs = sweep_csv(s);
  CHECK(count_lines(cs) == 1 + (int)s.trace.size());

  ProblemSpec da = load_problem(testkit::problem_path("drift_a.ini"));
  ProblemSpec db = load_problem(testkit::problem_path("drift_b.ini"));
  SweepReport broken = continuation_sweep(da, db, 11, "breaking");
  CHECK_FALSE(broken.completed);
  CHECK(broken.break_lo == doctest::Approx(0.8));
  CHECK(broken.break_hi == doctest::Approx(0.9));
  CHECK_FALSE(broken.break_message.empty());
  std::string bj = sweep_json(broken);
  CHECK(bj.find("\"completed\": false") != std::string::npos);
}

TEST_CASE("command line smoke checks") {
  namespace fs = std::filesystem;
  fs::path cli = fs::path(g_argv0).parent_path() / "conley";
  if (!fs::exists(cli)) {
    MESSAGE("conley binary not found next to the test binary; skipping");
    return;
  }
  auto dir = fresh_dir("cli");
  auto run = [&](const std::string& args) {
    std::string cmd = cli.string() + " " + args + " > " +
                      (dir / "out.txt").string() + " 2> " +
                      (dir / "err.txt").string();
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  };

  CHECK(run("validate --problem " + testkit::problem_path("saddle.ini")) == 0);
  CHECK(slurp((dir / "out.txt").string()).find("valid") == 0);

  auto bad = dir / "bad.ini";
  std::ofstream(bad) << "[operator]\ncore_diagonal = nope\n";
  CHECK(run("validate --problem " + bad.string()) == 2);

  CHECK(run("admissible --problem " + testkit::problem_path("saddle.ini")) == 0);
  CHECK(slurp((dir / "out.txt").string()).find("V2") != std::string::npos);

  CHECK(run("index --problem " + testkit::problem_path("saddle.ini")) == 0);
  CHECK(slurp((dir / "out.txt").string()).find("virtual degree 0 rank 1") !=
        std::string::npos);

  CHECK(run("report --problem " + testkit::problem_path("saddle.ini") +
            " --out " + (dir / "rep").string() + " --format csv") == 0);
  CHECK(fs::exists(dir / "rep" / "report.csv"));

  CHECK(run("sweep --problem " + testkit::problem_path("drift_a.ini") +
            " --problem-b " + testkit::problem_path("drift_b.ini") +
            " --steps 11") == 3);
  std::filesystem::remove_all(dir);
}

int main(int argc, char** argv) {
  g_argv0 = argv[0];
  return doctest::Context(argc, argv).run();
}
