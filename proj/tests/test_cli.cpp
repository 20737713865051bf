#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <string>

#include "qp1qec/generate.hpp"
#include "qp1qec/io.hpp"

using namespace qp1qec;
using Mat = Matrix<double>;
using Vec = Vector<double>;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run_env(const std::string& env, const std::string& args) {
  const std::string cmd = (env.empty() ? "" : env + " ") + std::string(QP1QEC_CLI_PATH) + " " +
                          args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult res;
  char buf[4096];
  std::size_t got = 0;
  while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0) res.out.append(buf, got);
  const int rc = pclose(pipe);
  res.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return res;
}

RunResult run(const std::string& args) { return run_env("", args); }

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "qp1qec_cli_tests";
  fs::create_directories(dir);
  return dir;
}

fs::path write_text(const std::string& name, const std::string& text) {
  const fs::path p = scratch_dir() / name;
  std::ofstream(p) << text;
  return p;
}

fs::path write_problem(const std::string& name, const Problem<double>& p,
                       const std::optional<MixedSplinesProblem<double>>& sp = {}) {
  const fs::path path = scratch_dir() / name;
  std::ofstream out(path);
  io::write_problem_file(out, p, sp);
  return path;
}

Mat diag3(double a, double b, double c) {
  Mat m = Mat::Zero(3, 3);
  m(0, 0) = a;
  m(1, 1) = b;
  m(2, 2) = c;
  return m;
}

Problem<double> reference_problem(double w1, double w2, double w3) {
  return Problem<double>{diag3(1.0, 1.0 / std::sqrt(2.0), 1.0),
                         KreinSignature<double>::FromSigns(Vec{{1.0, -1.0, 1.0}}),
                         diag3(2.0, 1.0, 1.0),
                         KreinSignature<double>::FromSigns(Vec{{1.0, 1.0, -1.0}}),
                         Vec{{w1, w2, w3}},
                         Vec::Zero(3),
                         {}};
}

Problem<double> no_verified_solution_problem() {
  const Vec dir = Vec{{1.0, 0.0, 1.0}} / std::sqrt(2.0);
  const Mat s = Mat::Identity(3, 3) - dir * dir.transpose();
  const Mat b = diag3(1.0, 2.0, -1.0);
  const Mat a = s - b;

  const auto eig = sym_eig<double>(a);
  Vec signs(3), scale(3);
  for (Index i = 0; i < 3; ++i) {
    signs(i) = eig.eigenvalues(i) >= 0.0 ? 1.0 : -1.0;
    scale(i) = std::sqrt(std::abs(eig.eigenvalues(i)));
  }
  const Mat t = scale.asDiagonal() * eig.eigenvectors.transpose();
  const Vec u = t.transpose().fullPivLu().solve(Vec::Unit(3, 1));

  return Problem<double>{t,
                         KreinSignature<double>::FromSigns(signs),
                         diag3(1.0, std::sqrt(2.0), 1.0),
                         KreinSignature<double>::FromSigns(Vec{{1.0, 1.0, -1.0}}),
                         signs.asDiagonal() * u,
                         Vec::Zero(3),
                         {}};
}

std::string strip_timings(std::string text) {
  return std::regex_replace(text, std::regex("\"timings_ms\":[^}]*"), "\"timings_ms\":0");
}

}  // namespace

TEST_CASE("solve prints a report and exits by status") {
  const fs::path file = write_problem("case3ii.json", reference_problem(1.0, 0.0, 1.0));
  const RunResult res = run("solve " + file.string());
  CHECK(res.code == 0);
  const json rep = json::parse(res.out);
  CHECK(rep["status"] == "SOLVED");
  CHECK(rep["interval"]["rho_minus"].get<double>() == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(rep["interval"]["rho_plus"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep["lambda"].get<double>() == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(rep["solution"]["radius"].get<double>() ==
        doctest::Approx(4.0 * std::sqrt(2.0) / 3.0).epsilon(1e-8));
  CHECK(rep["residuals"]["constraint"].get<double>() <= 1e-8);
}

TEST_CASE("analyze reports the interval and always exits zero") {
  const fs::path file = write_problem("analyze.json", reference_problem(1.0, 0.0, 1.0));
  const RunResult res = run("analyze " + file.string());
  CHECK(res.code == 0);
  const json rep = json::parse(res.out);
  CHECK(rep["interval"]["kind"] == "INTERVAL");
  CHECK(rep["kappa"].get<double>() == doctest::Approx(0.25).epsilon(1e-9));

  // Still zero when the instance is unbounded.
  Mat t(1, 2);
  t << 1.0, 0.0;
  const Problem<double> unbounded{t,
                                  KreinSignature<double>::FromSigns(Vec{{-1.0}}),
                                  Mat(Mat::Identity(2, 2)),
                                  KreinSignature<double>::FromSigns(Vec{{1.0, -1.0}}),
                                  Vec::Zero(1),
                                  Vec::Zero(2),
                                  {}};
  const fs::path ufile = write_problem("analyze_unbounded.json", unbounded);
  CHECK(run("analyze " + ufile.string()).code == 0);
}

TEST_CASE("verify accepts a certified pair and rejects a wrong multiplier") {
  const fs::path file = write_problem("case3i.json", reference_problem(5.0, 0.0, 1.0));
  const fs::path x = write_text("x.json", "[1.4, 0, 2.8]");

  const RunResult good = run("verify " + file.string() + " --x " + x.string() +
                             " --lambda 0.64285714285714285");
  CHECK(good.code == 0);
  const json grep = json::parse(good.out);
  CHECK(grep["status"] == "SOLVED");
  CHECK(grep["min_value"].get<double>() == doctest::Approx(16.2).epsilon(1e-8));
  CHECK(grep["residuals"]["lambda_in_interval"] == true);

  const RunResult bad =
      run("verify " + file.string() + " --x " + x.string() + " --lambda 2.0");
  CHECK(bad.code == 3);
  const json brep = json::parse(bad.out);
  CHECK(brep["status"] == "DEGENERATE");
  CHECK(brep["residuals"]["lambda_in_interval"] == false);
}

TEST_CASE("an unbounded instance exits 2 and ships a certificate") {
  Mat t(1, 2);
  t << 1.0, 0.0;
  const Problem<double> p{t,
                          KreinSignature<double>::FromSigns(Vec{{-1.0}}),
                          Mat(Mat::Identity(2, 2)),
                          KreinSignature<double>::FromSigns(Vec{{1.0, -1.0}}),
                          Vec::Zero(1),
                          Vec::Zero(2),
                          {}};
  const fs::path file = write_problem("unbounded.json", p);
  const RunResult res = run("solve " + file.string());
  CHECK(res.code == 2);
  const json rep = json::parse(res.out);
  CHECK(rep["status"] == "UNBOUNDED_BELOW");
  CHECK(rep["solution"].is_null());
  REQUIRE(rep.contains("certificate"));
  CHECK(rep["certificate"].size() == 2);
}

TEST_CASE("a degenerate instance with no verified point exits 4") {
  const fs::path file = write_problem("degenerate.json", no_verified_solution_problem());
  const RunResult res = run("solve " + file.string());
  CHECK(res.code == 4);
  const json rep = json::parse(res.out);
  CHECK(rep["status"] == "DEGENERATE");
  CHECK(rep["solution"].is_null());
  CHECK(rep["interval"]["kind"] == "POINT");
}

TEST_CASE("splines documents solve, and a surjectivity failure exits 5") {
  MixedSplinesProblem<double> msp;
  msp.u = Mat{{1, 0, 0}};
  msp.j1 = KreinSignature<double>::Identity(1);
  msp.w = Mat{{0, 1 / std::sqrt(2.0), 0}, {0, 0, 1}};
  msp.j2 = KreinSignature<double>::FromSigns(Vec{{-1.0, 1.0}});
  msp.mu = 1.0;
  msp.v = diag3(2.0, 1.0, 1.0);
  msp.je = KreinSignature<double>::FromSigns(Vec{{1.0, 1.0, -1.0}});
  msp.w0 = Vec{{-std::sqrt(2.0), 1.0}};
  msp.z0 = Vec::Zero(3);
  const Problem<double> stacked = build_problem(msp);
  const fs::path file = write_problem("splines.json", stacked, msp);
  const RunResult res = run("splines " + file.string());
  CHECK(res.code == 0);
  CHECK(json::parse(res.out)["status"] == "SOLVED");

  MixedSplinesProblem<double> thin;
  thin.u = Mat{{1, 0}};
  thin.j1 = KreinSignature<double>::Identity(1);
  thin.w = Mat{{1, 0}};
  thin.j2 = KreinSignature<double>::Identity(1);
  thin.mu = 1.0;
  thin.v = Mat(Mat::Identity(2, 2));
  thin.je = KreinSignature<double>::FromSigns(Vec{{1.0, -1.0}});
  thin.w0 = Vec{{1.0}};
  thin.z0 = Vec::Zero(2);
  const fs::path bad = write_problem("splines_thin.json", build_problem(thin), thin);
  CHECK(run("splines " + bad.string()).code == 5);

  // Plain documents are not accepted by this command.
  const fs::path plain = write_problem("plain.json", reference_problem(1.0, 0.0, 1.0));
  CHECK(run("splines " + plain.string()).code == 64);
}

TEST_CASE("malformed input exits 64, mismatched dimensions exit 65") {
  const fs::path bad = write_text("bad.json", "{ not json");
  CHECK(run("solve " + bad.string()).code == 64);
  CHECK(run("analyze " + bad.string()).code == 64);
  CHECK(run("solve " + (scratch_dir() / "missing.json").string()).code == 64);

  const fs::path mismatch = write_text("mismatch.json", R"({
    "n": 2, "mK": 2, "mE": 2,
    "T": [1,0, 0,1], "JK": [1,1],
    "V": [1,0, 0,1], "JE": [1,-1],
    "w0": [1,0,0], "z0": [0,0]
  })");
  CHECK(run("solve " + mismatch.string()).code == 65);
}

TEST_CASE("reports are deterministic once the timer is masked") {
  const fs::path file = write_problem("det.json", reference_problem(1.0, -std::sqrt(2.0), 1.0));
  const RunResult first = run("solve " + file.string());
  const RunResult second = run("solve " + file.string());
  CHECK(first.code == 0);
  CHECK(strip_timings(first.out) == strip_timings(second.out));
  CHECK(first.out.back() == '\n');
}

TEST_CASE("generate emits deterministic solvable instances") {
  const RunResult gen = run("generate --n 4 --seed 7");
  CHECK(gen.code == 0);
  const io::LoadedFile file = io::parse_problem_text(gen.out);
  CHECK(file.problem.n() == 4);

  const RunResult again = run("generate --n 4 --seed 7");
  CHECK(gen.out == again.out);
  CHECK(run("generate --n 4 --seed 8").out != gen.out);

  const fs::path path = write_text("generated.json", gen.out);
  const RunResult solved = run("solve " + path.string());
  CHECK(solved.code == 0);
  CHECK(json::parse(solved.out)["status"] == "SOLVED");

  const RunResult planted = run("generate --n 5 --seed 3 --planted-interval -1.0 2.0");
  CHECK(planted.code == 0);
  const fs::path ppath = write_text("planted.json", planted.out);
  const json rep = json::parse(run("analyze " + ppath.string()).out);
  CHECK(rep["interval"]["rho_minus"].get<double>() == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(rep["interval"]["rho_plus"].get<double>() == doctest::Approx(2.0).epsilon(1e-6));

  CHECK(run("generate --n 1 --seed 1").code == 70);
  CHECK(run("generate --n 3 --seed 1 --planted-interval 2.0 1.0").code == 70);
}

TEST_CASE("one hundred generated instances all solve and verify") {
  for (int i = 0; i < 100; ++i) {
    const Problem<double> p = generate_problem(2 + (i % 5), 500 + i);
    const SolveOutcome<double> out = solve(p);
    REQUIRE(out.status == SolveStatus::Solved);
    REQUIRE(out.verification.has_value());
    CHECK(out.verification->passed());
  }
}

TEST_CASE("the tolerance override is honored and garbage is rejected") {
  const fs::path file = write_problem("env.json", reference_problem(1.0, 0.0, 1.0));
  const RunResult loose = run_env("QP1QEC_TOLERANCE=1e-4", "solve " + file.string());
  CHECK(loose.code == 0);
  CHECK(json::parse(loose.out)["residuals"]["tolerance"].get<double>() == 1e-4);

  CHECK(run_env("QP1QEC_TOLERANCE=banana", "solve " + file.string()).code == 70);
  CHECK(run_env("QP1QEC_TOLERANCE=-1", "solve " + file.string()).code == 70);
}
