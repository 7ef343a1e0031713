#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "maforge/runner.hpp"

using namespace maforge;

namespace {

RunConfig small_tetrahedron() {
  RunConfig c;
  c.n = 3;
  c.preset = "tetrahedron";
  c.m = 17;
  return c;
}

const RunArtifacts& tetrahedron_run() {
  static const RunArtifacts a = execute_run(small_tetrahedron());
  return a;
}

}  // namespace

TEST_CASE("config round trip") {
  RunConfig c;
  c.mode = "y-graph";
  c.segments_file = "segs.txt";
  c.R = 3.5;
  c.m = 41;
  c.eps = 0.1;
  c.eps_tilde = 0.4;
  c.r0 = 0.2;
  c.tol_r = 1e-4;
  c.sweep = "jacobi";
  c.seed = 12345678901ULL;
  std::stringstream ss;
  write_config(ss, c);
  CHECK(read_config(ss) == c);

  std::stringstream plain;
  write_config(plain, RunConfig{});
  CHECK(plain.str().find("\neps") == std::string::npos);
  CHECK(read_config(plain) == RunConfig{});
}

TEST_CASE("config parsing errors") {
  std::istringstream comments("# header\n m = 21  # inline\n\npreset = cube\n");
  const RunConfig c = read_config(comments);
  CHECK(c.m == 21);
  CHECK(c.preset == "cube");
  std::istringstream unknown("colour = blue\n");
  CHECK_THROWS_AS(read_config(unknown), ConfigError);
  std::istringstream no_eq("m 21\n");
  CHECK_THROWS_AS(read_config(no_eq), ConfigError);
  std::istringstream bad_num("m = 2x\n");
  CHECK_THROWS_AS(read_config(bad_num), ConfigError);
  std::istringstream bad_double("R = four\n");
  CHECK_THROWS_AS(read_config(bad_double), ConfigError);
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(validate_config(RunConfig{}));
  auto rejects = [](auto edit) {
    RunConfig c;
    edit(c);
    CHECK_THROWS_AS(validate_config(c), ConfigError);
  };
  rejects([](RunConfig& c) { c.mode = "solve"; });
  rejects([](RunConfig& c) { c.n = 5; });
  rejects([](RunConfig& c) { c.m = 4; });
  rejects([](RunConfig& c) { c.m = 3; });
  rejects([](RunConfig& c) { c.n = 4, c.m = 35, c.preset = "simplex"; });
  rejects([](RunConfig& c) { c.R = 0; });
  rejects([](RunConfig& c) { c.tol_r = -1; });
  rejects([](RunConfig& c) { c.max_sweeps = 0; });
  rejects([](RunConfig& c) { c.beta = -0.5; });
  rejects([](RunConfig& c) { c.eps = 0.0; });
  rejects([](RunConfig& c) { c.r0 = 1.0; });
  rejects([](RunConfig& c) { c.sweep = "sor"; });
  rejects([](RunConfig& c) { c.mode = "y-graph"; });
  rejects([](RunConfig& c) { c.preset = "dodecahedron"; });
  RunConfig bad_file;
  bad_file.vertex_file = "/nonexistent/omega.txt";
  CHECK_THROWS_AS(execute_run(bad_file), ConfigError);
}

TEST_CASE("small tetrahedron run artifacts") {
  const RunArtifacts& a = tetrahedron_run();
  const TensorGrid& g = a.result.u_star.grid;
  CHECK(a.omega.has_value());
  CHECK(a.result.pieces.size() == 4);
  CHECK(a.tol_c == doctest::Approx(10 * a.config.tol_r * g.spacing() * g.spacing()));
  CHECK(a.u_primal.grid == g);
  CHECK_FALSE(a.report.checks.empty());
  CHECK(a.report.checks.front().name == "solver_converged");
  CHECK(a.report.checks.front().passed);

  const auto ids = stratum_ids(a);
  REQUIRE(ids.size() == g.size());
  CHECK(ids[g.nearest(Point::Zero(3))] == 0.0);
  for (double v : ids) CHECK((v >= 0.0 && v <= 3.0));

  std::stringstream csv;
  write_fields_csv(csv, a);
  std::string header;
  std::getline(csv, header);
  CHECK(header == "x1,x2,x3,u_star,u,psi,contact,stratum");
  csv.seekg(0);
  const FieldTable t = read_fields_csv(csv);
  CHECK(t.grid == g);
  CHECK(t.names == std::vector<std::string>{"u_star", "u", "psi", "contact", "stratum"});
  CHECK(t.columns[0] == a.result.u_star.values);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(t.columns[3][i] == (a.result.u_star[i] - a.result.obstacle[i] <= a.tol_c ? 1.0 : 0.0));
    CHECK(t.columns[4][i] == ids[i]);
  }

  const auto m = nlohmann::json::parse(manifest_json(a));
  for (const char* key : {"config", "parameters", "solver", "pieces", "contact", "timings", "report", "files"})
    CHECK(m.contains(key));
  CHECK(m["pieces"].size() == 4);
  CHECK(m["config"]["m"] == 17);
}

TEST_CASE("artifact files") {
  const RunArtifacts& a = tetrahedron_run();
  const auto dir = std::filesystem::temp_directory_path() / "maforge_runner_test";
  std::filesystem::remove_all(dir);
  write_artifacts(a, dir);
  for (const char* f : {"config.ini", "fields.csv", "fields.vtk", "report.json", "manifest.json"})
    CHECK(std::filesystem::exists(dir / f));
  std::ifstream cfg(dir / "config.ini");
  CHECK(read_config(cfg) == a.config);
  std::ifstream vtk(dir / "fields.vtk");
  std::string first;
  std::getline(vtk, first);
  CHECK(first == "# vtk DataFile Version 3.0");
  std::ifstream rep(dir / "report.json");
  const auto j = nlohmann::json::parse(rep);
  CHECK(j["checks"].size() == a.report.checks.size());
  std::filesystem::remove_all(dir);
}

TEST_CASE("Jacobi runs are bit-reproducible") {
  RunConfig c = small_tetrahedron();
  c.m = 13;
  c.sweep = "jacobi";
  const RunArtifacts a = execute_run(c), b = execute_run(c);
  CHECK(a.result.u_star.values == b.result.u_star.values);
  CHECK(a.u.values.values == b.u.values.values);
  CHECK(a.result.update_history == b.result.update_history);
}

TEST_CASE("barrier check report") {
  const auto runs = barrier_checks(50, 4);
  CHECK(runs.size() == 5);
  const VerificationReport rep = barrier_report(runs);
  CHECK(rep.passed());
  std::ostringstream csv;
  write_barrier_csv(csv, runs);
  const std::string text = csv.str();
  CHECK(text.rfind("model,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 5 * 50);
}
