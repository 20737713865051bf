#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qp1qec/generate.hpp"
#include "qp1qec/io.hpp"
#include "qp1qec/solver.hpp"
#include "qp1qec/splines.hpp"

using namespace qp1qec;
using Clock = std::chrono::steady_clock;

namespace {

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

/// QP1QEC_TOLERANCE overrides the verification tolerance for the run;
/// anything that does not parse as a positive number is a hard error.
std::optional<double> env_tolerance() {
  const char* env = std::getenv("QP1QEC_TOLERANCE");
  if (!env || !*env) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(env, &end);
  if (end == env || *end != '\0' || !std::isfinite(v) || v <= 0)
    throw std::runtime_error("QP1QEC_TOLERANCE must be a positive number, got '" +
                             std::string(env) + "'");
  return v;
}

io::LoadedFile load_with_overrides(const std::string& path) {
  io::LoadedFile file = io::load_problem_file(path);
  if (const auto tol = env_tolerance()) file.problem.tol.residual_tol = *tol;
  return file;
}

Vector<double> load_vector_file(const std::string& path, Index n) {
  std::ifstream in(path);
  if (!in) throw FileFormatError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  io::json root;
  try {
    root = io::json::parse(ss.str());
  } catch (const io::json::exception& e) {
    throw FileFormatError(e.what());
  }
  return io::detail::vector_from(root, n, "x");
}

int status_exit(SolveStatus s) {
  switch (s) {
    case SolveStatus::Solved: return 0;
    case SolveStatus::UnboundedBelow: return 2;
    case SolveStatus::InfimumNotAttained: return 3;
    case SolveStatus::Degenerate: return 4;
  }
  return 4;
}

int solve_and_report(const Problem<double>& problem, bool force_zero) {
  const auto start = Clock::now();
  const SolveOutcome<double> out = solve(problem);
  const ExistenceReport<double> existence = existence_for_all_data(problem);
  io::write_report(std::cout, io::make_report(out, existence, elapsed_ms(start)));
  if (!out.detail.empty()) std::cerr << "note: " << out.detail << '\n';
  return force_zero ? 0 : status_exit(out.status);
}

/// Best-effort interval/spectrum diagnostics for reports built outside the
/// solver (the verify command); failures leave the fields at their defaults.
void fill_analysis(io::Report& rep, const Problem<double>& problem) {
  try {
    const DeflatedProblem<double> deflated = deflate(problem);
    const GramPair<double> pair = GramPair<double>::FromOperators(
        deflated.t_r, problem.jk, deflated.v_r, problem.je, problem.tol);
    rep.interval = psd_interval(pair, problem.tol);
    if (rep.interval.kind == IntervalKind::Interval) {
      const ReducedPencil<double> pencil = reduce_pencil(pair, rep.interval, problem.tol);
      rep.kappa = pencil.kappa;
      rep.dim_n_plus = static_cast<Index>(pencil.n_plus.size());
      rep.dim_n_minus = static_cast<Index>(pencil.n_minus.size());
      rep.dim_n_g = static_cast<Index>(pencil.zero.size());
      rep.dim_d_plus = static_cast<Index>(pencil.d_plus.size());
      rep.dim_d_minus = static_cast<Index>(pencil.d_minus.size());
    }
  } catch (const std::exception&) {
  }
  try {
    rep.existence_for_all_data = existence_for_all_data(problem).for_all_data;
  } catch (const std::exception&) {
  }
}

int run_verify(const std::string& path, const std::string& x_path, double lambda) {
  const io::LoadedFile file = load_with_overrides(path);
  const Vector<double> x = load_vector_file(x_path, file.problem.n());
  const auto start = Clock::now();
  const VerificationReport<double> vr = verify_solution(file.problem, x, lambda);
  io::Report rep;
  rep.status = vr.passed() ? "SOLVED" : "DEGENERATE";
  rep.lambda = lambda;
  rep.min_value = file.problem.objective(x);
  rep.residuals = vr;
  fill_analysis(rep, file.problem);
  rep.timings_ms = elapsed_ms(start);
  io::write_report(std::cout, rep);
  return vr.passed() ? 0 : 3;
}

int run_splines(const std::string& path) {
  const io::LoadedFile file = load_with_overrides(path);
  if (!file.splines)
    throw FileFormatError("the splines command needs a document with a 'splines' object");
  const MixedSplinesProblem<double>& msp = *file.splines;
  const SurjectivityReport check = check_T_surjective(msp.u, msp.w, file.problem.tol);
  std::cerr << "surjectivity: " << (check.surjective ? "holds" : "FAILS")
            << " (dim null U = " << check.dim_null_u << ", dim null W = " << check.dim_null_w
            << ", common = " << check.dim_null_common << ")\n";
  const Problem<double> stacked = build_problem(msp, file.problem.tol);
  const int code = solve_and_report(stacked, /*force_zero=*/false);
  return check.surjective ? code : 5;
}

int run_generate(Index n, std::uint64_t seed, const std::vector<double>& interval) {
  const Problem<double> p = generate_problem(n, seed, interval.at(0), interval.at(1));
  io::write_problem_file(std::cout, p);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"indefinite least squares with one quadratic equality constraint"};
  app.require_subcommand(1);

  std::string path;
  std::string x_path;
  double lambda = 0.0;
  Index gen_n = 0;
  std::uint64_t gen_seed = 0;
  std::vector<double> planted = {0.5, 1.0};

  CLI::App* analyze = app.add_subcommand("analyze", "report the admissible shift interval");
  analyze->add_option("file", path, "problem file")->required();

  CLI::App* solve_cmd = app.add_subcommand("solve", "solve a problem and print a report");
  solve_cmd->add_option("file", path, "problem file")->required();

  CLI::App* verify = app.add_subcommand("verify", "check a candidate solution");
  verify->add_option("file", path, "problem file")->required();
  verify->add_option("--x", x_path, "file with the candidate point as a JSON array")->required();
  verify->add_option("--lambda", lambda, "candidate multiplier")->required();

  CLI::App* gen = app.add_subcommand("generate", "emit a random solvable instance");
  gen->add_option("--n", gen_n, "dimension")->required();
  gen->add_option("--seed", gen_seed, "random seed")->required();
  gen->add_option("--planted-interval", planted, "admissible shift interval endpoints")
      ->expected(2);

  CLI::App* splines = app.add_subcommand("splines", "solve a two-operator smoothing instance");
  splines->add_option("file", path, "problem file with a 'splines' object")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 70;
  }

  try {
    if (analyze->parsed()) return solve_and_report(load_with_overrides(path).problem, true);
    if (solve_cmd->parsed()) return solve_and_report(load_with_overrides(path).problem, false);
    if (verify->parsed()) return run_verify(path, x_path, lambda);
    if (gen->parsed()) return run_generate(gen_n, gen_seed, planted);
    if (splines->parsed()) return run_splines(path);
  } catch (const FileFormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 64;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 65;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 70;
  }
  return 70;
}
