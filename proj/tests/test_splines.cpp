#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "qp1qec/solver.hpp"
#include "qp1qec/splines.hpp"

using namespace qp1qec;
using Mat = Matrix<double>;
using Vec = Vector<double>;

namespace {

Mat random_matrix(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> normal;
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

Vec random_vector(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> normal;
  Vec v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

KreinSignature<double> random_signs(std::mt19937_64& rng, Index n) {
  std::bernoulli_distribution coin;
  Vec s(n);
  for (Index i = 0; i < n; ++i) s(i) = coin(rng) ? 1.0 : -1.0;
  return KreinSignature<double>::FromSigns(s);
}

double mixed_objective(const MixedSplinesProblem<double>& msp, const Vec& x) {
  const Vec ux = msp.u * x;
  const Vec wr = msp.w * x - msp.w0;
  return msp.j1.product(ux, ux) + msp.mu * msp.j2.product(wr, wr);
}

}  // namespace

TEST_CASE("stacking produces the expected operator, weight, and target") {
  MixedSplinesProblem<double> msp;
  msp.u = Mat{{1.0, 0.0}};
  msp.j1 = KreinSignature<double>::FromSigns(Vec{{1.0}});
  msp.w = Mat{{0.0, 1.0}};
  msp.j2 = KreinSignature<double>::FromSigns(Vec{{1.0}});
  msp.v = Mat::Identity(2, 2);
  msp.je = KreinSignature<double>::FromSigns(Vec{{1.0, -1.0}});
  msp.mu = 2.0;
  msp.w0 = Vec{{3.0}};
  msp.z0 = Vec::Zero(2);

  const Problem<double> p = build_problem(msp);
  CHECK((p.t - Mat::Identity(2, 2)).norm() == 0.0);
  CHECK((p.jk.matrix() - Mat(Vec{{1.0, 2.0}}.asDiagonal())).norm() == 0.0);
  CHECK((p.w0 - Vec{{0.0, 3.0}}).norm() == 0.0);
  CHECK((p.v - msp.v).norm() == 0.0);
  CHECK((p.z0 - msp.z0).norm() == 0.0);

  // A negative weight flips the sign block and makes the weight indefinite.
  msp.mu = -1.0;
  const Problem<double> flipped = build_problem(msp);
  CHECK((flipped.jk.matrix() - Mat(Vec{{1.0, -1.0}}.asDiagonal())).norm() == 0.0);
}

TEST_CASE("stacking rejects a zero weight and mismatched shapes") {
  MixedSplinesProblem<double> msp;
  msp.u = Mat{{1.0, 0.0}};
  msp.j1 = KreinSignature<double>::FromSigns(Vec{{1.0}});
  msp.w = Mat{{0.0, 1.0}};
  msp.j2 = KreinSignature<double>::FromSigns(Vec{{1.0}});
  msp.v = Mat::Identity(2, 2);
  msp.je = KreinSignature<double>::FromSigns(Vec{{1.0, -1.0}});
  msp.mu = 1.0;
  msp.w0 = Vec{{3.0}};
  msp.z0 = Vec::Zero(2);

  auto bad_mu = msp;
  bad_mu.mu = 0.0;
  CHECK_THROWS_AS((void)build_problem(bad_mu), InvalidProblemError);

  auto bad_w0 = msp;
  bad_w0.w0 = Vec::Zero(2);
  CHECK_THROWS_AS((void)build_problem(bad_w0), DimensionError);

  auto bad_domain = msp;
  bad_domain.w = Mat{{0.0, 1.0, 0.0}};
  CHECK_THROWS_AS((void)build_problem(bad_domain), DimensionError);

  auto bad_sig = msp;
  bad_sig.j2 = KreinSignature<double>::FromSigns(Vec{{1.0, 1.0}});
  CHECK_THROWS_AS((void)build_problem(bad_sig), DimensionError);
}

TEST_CASE("stacked objective equals the mixed objective on random instances") {
  std::mt19937_64 rng(20260814);
  std::uniform_real_distribution<double> weight(-3.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 4;
    MixedSplinesProblem<double> msp;
    msp.u = random_matrix(rng, 2, n);
    msp.j1 = random_signs(rng, 2);
    msp.w = random_matrix(rng, 3, n);
    msp.j2 = random_signs(rng, 3);
    msp.v = random_matrix(rng, 2, n);
    msp.je = random_signs(rng, 2);
    double mu = weight(rng);
    if (std::abs(mu) < 0.1) mu = 0.5;
    msp.mu = mu;
    msp.w0 = random_vector(rng, 3);
    msp.z0 = random_vector(rng, 2);

    const Problem<double> p = build_problem(msp);
    for (int k = 0; k < 3; ++k) {
      const Vec x = random_vector(rng, n);
      const double direct = mixed_objective(msp, x);
      CHECK(std::abs(p.objective(x) - direct) <= 1e-12 * (1.0 + std::abs(direct)));
    }
  }
}

TEST_CASE("surjectivity of the stack is decided by the nullspace dimensions") {
  const Mat u = Mat{{1.0, 0.0}};
  const Mat w = Mat{{0.0, 1.0}};
  const auto good = check_T_surjective(u, w);
  CHECK(good.surjective);
  CHECK(good.dim_null_u == 1);
  CHECK(good.dim_null_w == 1);
  CHECK(good.dim_null_common == 0);

  const auto overlap = check_T_surjective(u, u);
  CHECK_FALSE(overlap.surjective);
  CHECK(overlap.dim_null_u == 1);
  CHECK(overlap.dim_null_w == 1);
  CHECK(overlap.dim_null_common == 1);

  const auto tight = check_T_surjective(u, Mat(Mat::Identity(2, 2)));
  CHECK_FALSE(tight.surjective);
  CHECK(tight.dim_null_u == 1);
  CHECK(tight.dim_null_w == 0);
  CHECK(tight.dim_null_common == 0);
}

TEST_CASE("surjectivity verdict agrees with the rank of the stacked operator") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> dim(3, 6);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = dim(rng);
    std::uniform_int_distribution<int> rows(1, static_cast<int>(n));
    const Index m1 = rows(rng);
    const Index m2 = rows(rng);
    const Mat u = random_matrix(rng, m1, n);
    const Mat w = random_matrix(rng, m2, n);
    Mat stacked(m1 + m2, n);
    stacked.topRows(m1) = u;
    stacked.bottomRows(m2) = w;
    const bool by_rank = numerical_rank<double>(stacked, 1e-10) == m1 + m2;
    CHECK(check_T_surjective(u, w).surjective == by_rank);
  }
}

TEST_CASE("a stacked instance solves end to end") {
  // Rebuilds the reference diagonal family through the mixed form.
  MixedSplinesProblem<double> msp;
  msp.u = Mat{{1.0, 0.0, 0.0}};
  msp.j1 = KreinSignature<double>::FromSigns(Vec{{1.0}});
  msp.w = Mat{{0.0, 1.0 / std::sqrt(2.0), 0.0}, {0.0, 0.0, 1.0}};
  msp.j2 = KreinSignature<double>::FromSigns(Vec{{-1.0, 1.0}});
  msp.v = Mat(Vec{{2.0, 1.0, 1.0}}.asDiagonal());
  msp.je = KreinSignature<double>::FromSigns(Vec{{1.0, 1.0, -1.0}});
  msp.mu = 1.0;
  msp.w0 = Vec{{-std::sqrt(2.0), 1.0}};
  msp.z0 = Vec::Zero(3);

  const Problem<double> p = build_problem(msp);
  CHECK(check_T_surjective(msp.u, msp.w).surjective);

  const auto out = solve(p);
  REQUIRE(out.status == SolveStatus::Solved);
  REQUIRE(out.verification.has_value());
  CHECK(out.verification->passed());
  REQUIRE(out.solution.has_value());
  CHECK(std::abs(mixed_objective(msp, out.solution->representative()) - out.solution->min_value) <=
        1e-10);
}
