#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "maforge/runner.hpp"

using namespace maforge;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitVerification = 1;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

struct RunFlags {
  std::string config_file;
  RunConfig given;
  std::optional<double> eps, eps_tilde, r0;
};

void add_run_flags(CLI::App* run, RunFlags& f) {
  run->add_option("-c,--config", f.config_file, "key = value config file; flags override it");
  run->add_option("--mode", f.given.mode, "polytope | y-graph | barrier-check | legendre-test");
  run->add_option("--n", f.given.n, "dimension (2, 3 or 4)");
  run->add_option("--preset", f.given.preset, "polytope preset");
  run->add_option("--vertex-file", f.given.vertex_file, "polytope file (n d V E format)");
  run->add_option("--segments", f.given.segments_file, "segment list for y-graph mode");
  run->add_option("--R", f.given.R, "box half-width");
  run->add_option("--m", f.given.m, "points per axis (odd)");
  run->add_option("--eps", f.eps, "supersolution offset");
  run->add_option("--eps-tilde", f.eps_tilde, "y-graph starting offset");
  run->add_option("--r0", f.r0, "y-graph cap radius parameter");
  run->add_option("--beta", f.given.beta, "boundary data offset");
  run->add_option("--tol-r", f.given.tol_r, "residual tolerance");
  run->add_option("--max-sweeps", f.given.max_sweeps, "sweep limit");
  run->add_option("--sweep", f.given.sweep, "gauss-seidel | jacobi");
  run->add_option("-o,--out", f.given.out_dir, "output directory");
  run->add_option("--seed", f.given.seed, "seed for sampled checks");
}

RunConfig merge(const CLI::App* run, const RunFlags& f) {
  RunConfig c;
  if (!f.config_file.empty()) {
    std::ifstream in(f.config_file);
    if (!in) throw ConfigError("cannot open config " + f.config_file);
    c = read_config(in);
  }
  auto given = [&](const char* flag) { return run->count(flag) > 0; };
  const RunConfig& g = f.given;
  if (given("--mode")) c.mode = g.mode;
  if (given("--n")) c.n = g.n;
  if (given("--preset")) c.preset = g.preset;
  if (given("--vertex-file")) c.vertex_file = g.vertex_file;
  if (given("--segments")) c.segments_file = g.segments_file;
  if (given("--R")) c.R = g.R;
  if (given("--m")) c.m = g.m;
  if (f.eps) c.eps = f.eps;
  if (f.eps_tilde) c.eps_tilde = f.eps_tilde;
  if (f.r0) c.r0 = f.r0;
  if (given("--beta")) c.beta = g.beta;
  if (given("--tol-r")) c.tol_r = g.tol_r;
  if (given("--max-sweeps")) c.max_sweeps = g.max_sweeps;
  if (given("--sweep")) c.sweep = g.sweep;
  if (given("--out")) c.out_dir = g.out_dir;
  if (given("--seed")) c.seed = g.seed;
  return c;
}

int report_exit(const VerificationReport& rep) {
  std::cout << rep.summary();
  std::cout << (rep.passed() ? "all checks passed\n" : "verification failed\n");
  return rep.passed() ? kExitPass : kExitVerification;
}

int barrier_command(int samples, std::uint64_t seed, const std::string& csv) {
  const auto runs = barrier_checks(samples, seed);
  if (csv.empty() || csv == "-") {
    write_barrier_csv(std::cout, runs);
  } else {
    std::ofstream os(csv);
    if (!os) throw std::runtime_error("cannot write " + csv);
    write_barrier_csv(os, runs);
  }
  const VerificationReport rep = barrier_report(runs);
  std::cerr << rep.summary();
  return rep.passed() ? kExitPass : kExitVerification;
}

int run_command(const RunConfig& cfg) {
  validate_config(cfg);
  const std::filesystem::path out = cfg.out_dir;
  if (cfg.mode == "barrier-check") {
    std::filesystem::create_directories(out);
    return barrier_command(200, cfg.seed, (out / "barrier.csv").string());
  }
  if (cfg.mode == "legendre-test") return report_exit(legendre_self_test(10000, cfg.seed));
  const RunArtifacts a = execute_run(cfg);
  write_artifacts(a, out);
  std::cout << "solve " << a.solve_seconds << " s, " << a.result.iterations << " sweeps, delta "
            << a.result.params.delta << "; analysis " << a.analysis_seconds << " s\n";
  std::cout << "artifacts in " << out.string() << '\n';
  return report_exit(a.report);
}

int export_command(const std::string& input, const std::string& vtk) {
  std::ifstream in(input);
  if (!in) throw std::runtime_error("cannot open " + input);
  const FieldTable t = read_fields_csv(in);
  std::vector<std::pair<std::string, const std::vector<double>*>> cols;
  for (std::size_t k = 0; k < t.names.size(); ++k) cols.emplace_back(t.names[k], &t.columns[k]);
  std::ofstream os(vtk);
  if (!os) throw std::runtime_error("cannot write " + vtk);
  write_fields_vtk(os, t.grid, "maforge export", cols);
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Obstacle-problem Monge-Ampere solver and verifier"};
  app.require_subcommand(1);

  RunFlags flags;
  CLI::App* run = app.add_subcommand("run", "solve, export and verify one configuration");
  add_run_flags(run, flags);

  int samples = 200;
  std::uint64_t seed = 1;
  std::string barrier_csv;
  CLI::App* barrier = app.add_subcommand("barrier-check", "determinant checks of the barriers");
  barrier->add_option("--samples", samples, "samples per barrier");
  barrier->add_option("--seed", seed, "sample seed");
  barrier->add_option("-o,--out", barrier_csv, "CSV output (stdout by default)");

  int lt_samples = 10000;
  std::uint64_t lt_seed = 1;
  CLI::App* legendre = app.add_subcommand("legendre-test", "fast Legendre transform self-test");
  legendre->add_option("--samples", lt_samples, "random samples for the invariants");
  legendre->add_option("--seed", lt_seed, "sample seed");

  std::string input, vtk;
  CLI::App* exp = app.add_subcommand("export", "convert a fields CSV to legacy VTK");
  exp->add_option("input", input, "fields CSV")->required();
  exp->add_option("-o,--vtk", vtk, "VTK output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitConfig;
  }

  try {
    if (run->parsed()) return run_command(merge(run, flags));
    if (barrier->parsed()) return barrier_command(samples, seed, barrier_csv);
    if (legendre->parsed()) return report_exit(legendre_self_test(lt_samples, lt_seed));
    if (exp->parsed()) return export_command(input, vtk);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SolverError& e) {
    std::cerr << "solver did not converge: " << e.what() << '\n';
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitVerification;
  }
  return kExitPass;
}
