#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qp1qec/oracle.hpp"

using namespace qp1qec;
using oracle::SampleConfig;

namespace {

Matrix<double> diag3(double a, double b, double c) {
  Vector<double> d(3);
  d << a, b, c;
  return d.asDiagonal();
}

// Weighted projection problem in R^3: the same operator family used across
// the solver tests, here only as ground truth for the sampling oracle.
Problem<double> reference_problem(double w1, double w2, double w3) {
  Problem<double> p{diag3(1.0, 1.0 / std::sqrt(2.0), 1.0),
                    KreinSignature<double>::FromSigns(Vector<double>{{1.0, -1.0, 1.0}}),
                    diag3(2.0, 1.0, 1.0),
                    KreinSignature<double>::FromSigns(Vector<double>{{1.0, 1.0, -1.0}}),
                    Vector<double>{{w1, w2, w3}},
                    Vector<double>::Zero(3),
                    {}};
  return p;
}

}  // namespace

TEST_CASE("cone samples are neutral and stream is a pure function of (seed, index)") {
  const Matrix<double> b = diag3(4.0, 1.0, -1.0);
  SampleConfig config;
  config.seed = 7;
  config.count = 256;
  const Matrix<double> samples = oracle::sample_neutral_cone(b, config);
  REQUIRE(samples.cols() == 256);
  for (Index i = 0; i < samples.cols(); ++i) {
    const Vector<double> y = samples.col(i);
    CHECK(std::abs(y.dot(b * y)) <= oracle::kNeutralBandRel * b.norm() * y.squaredNorm());
  }

  SampleConfig shorter = config;
  shorter.count = 32;
  const Matrix<double> prefix = oracle::sample_neutral_cone(b, shorter);
  CHECK((samples.leftCols(32) - prefix).norm() == 0.0);

  SampleConfig other = config;
  other.seed = 8;
  const Matrix<double> reseeded = oracle::sample_neutral_cone(b, other);
  CHECK((samples.leftCols(32) - reseeded.leftCols(32)).norm() > 1e-6);

  CHECK_THROWS_AS(oracle::sample_neutral_cone<double>(diag3(1.0, 2.0, 0.5), config),
                  SemidefiniteError);
}

TEST_CASE("brute_min recovers the exact minimum of a planar projection") {
  // minimize ||x - (3,1)||^2 over the cone x1^2 = x2^2; the closest point on
  // the line x2 = x1 is (2,2) with squared distance 2.
  Problem<double> p{Matrix<double>::Identity(2, 2),
                    KreinSignature<double>::Identity(2),
                    Matrix<double>::Identity(2, 2),
                    KreinSignature<double>::FromSigns(Vector<double>{{1.0, -1.0}}),
                    Vector<double>{{3.0, 1.0}},
                    Vector<double>::Zero(2),
                    {}};
  SampleConfig config;
  config.seed = 3;
  config.count = 64;
  config.refine_iters = 24;
  const auto result = oracle::brute_min(p, config);
  CHECK(result.value == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(result.point(0) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(result.point(1) == doctest::Approx(2.0).epsilon(1e-6));

  const auto again = oracle::brute_min(p, config);
  CHECK(again.value == result.value);
  CHECK((again.point - result.point).norm() == 0.0);
}

TEST_CASE("brute_min upper bound tightens monotonically with the sample budget") {
  const Problem<double> p = reference_problem(5.0, 0.0, 1.0);
  SampleConfig small;
  small.seed = 11;
  small.count = 40;
  small.refine_iters = 6;
  SampleConfig medium = small;
  medium.count = 160;
  SampleConfig large = small;
  large.count = 640;
  const double v_small = oracle::brute_min(p, small).value;
  const double v_medium = oracle::brute_min(p, medium).value;
  const double v_large = oracle::brute_min(p, large).value;
  CHECK(v_medium <= v_small);
  CHECK(v_large <= v_medium);
}

TEST_CASE("brute_min brackets the known optimum of the weighted projection") {
  // Optimal point (1.4, 0, 2.8); objective there is 16.2.
  const Problem<double> p = reference_problem(5.0, 0.0, 1.0);
  SampleConfig config;
  config.seed = 19;
  config.count = 3000;
  config.refine_iters = 60;
  const auto result = oracle::brute_min(p, config);
  CHECK(result.value >= 16.2 - 1e-8);
  CHECK(result.value <= 16.2 + 1e-3);
  const GramPair<double> pair = p.grams();
  CHECK(std::abs(p.constraint(result.point)) <=
        1e-10 * (1.0 + pair.b.norm()) * (1.0 + result.point.squaredNorm()));
}

TEST_CASE("find_negative_neutral_direction certifies unbounded objectives") {
  Matrix<double> a(2, 2);
  a << -1.0, 0.0, 0.0, 0.0;
  Matrix<double> b(2, 2);
  b << 1.0, 0.0, 0.0, -1.0;
  SampleConfig config;
  config.seed = 5;
  config.count = 128;
  const auto dir = oracle::find_negative_neutral_direction(a, b, config);
  REQUIRE(dir.has_value());
  const Vector<double>& y = *dir;
  CHECK(std::abs(y.norm() - 1.0) <= 1e-12);
  CHECK(std::abs(y.dot(b * y)) <= 1e-12);
  CHECK(y.dot(a * y) == doctest::Approx(-0.5).epsilon(1e-9));

  // With a positive semidefinite numerator the cone carries no descent ray.
  Matrix<double> a_psd(2, 2);
  a_psd << 1.0, 0.0, 0.0, 0.0;
  CHECK_FALSE(oracle::find_negative_neutral_direction(a_psd, b, config).has_value());
}

TEST_CASE("lambda_sweep localizes the feasible shift by a constraint sign change") {
  const Problem<double> p = reference_problem(5.0, 0.0, 1.0);
  const auto table = oracle::lambda_sweep(p, 11);
  REQUIRE(table.size() == 11);
  CHECK(table.front().lambda == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(table.back().lambda == doctest::Approx(1.0).epsilon(1e-9));

  // Interior shifts solve the stationarity system exactly; the right endpoint
  // is singular with an incompatible component, so its residual stays large.
  for (std::size_t k = 1; k + 1 < table.size(); ++k)
    CHECK(table[k].normal_residual <= 1e-10);
  CHECK(table.back().normal_residual > 1e-3);

  bool sign_change = false;
  for (std::size_t k = 0; k + 1 < table.size(); ++k)
    if (table[k].constraint_value > 0.0 && table[k + 1].constraint_value < 0.0) sign_change = true;
  CHECK(sign_change);

  // The known optimal shift 9/14 feeds back a feasible stationary point.
  const GramPair<double> pair = p.grams();
  const double lam = 9.0 / 14.0;
  const Matrix<double> s = pair.a + lam * pair.b;
  const Vector<double> rhs = indefinite_adjoint(p.t, p.jk) * p.w0;
  const Vector<double> x = s.ldlt().solve(rhs);
  CHECK(x(0) == doctest::Approx(1.4).epsilon(1e-10));
  CHECK(std::abs(x(1)) <= 1e-12);
  CHECK(x(2) == doctest::Approx(2.8).epsilon(1e-10));
  CHECK(std::abs(p.constraint(x)) <= 1e-10);
}

TEST_CASE("lambda_sweep on a point interval returns the single admissible shift") {
  Problem<double> p{Matrix<double>::Identity(2, 2),
                    KreinSignature<double>::FromSigns(Vector<double>{{1.0, -1.0}}),
                    Matrix<double>::Identity(2, 2),
                    KreinSignature<double>::FromSigns(Vector<double>{{1.0, -1.0}}),
                    Vector<double>{{2.0, 1.0}},
                    Vector<double>{{2.0, 1.0}},
                    {}};
  const auto table = oracle::lambda_sweep(p, 7);
  REQUIRE(table.size() == 1);
  CHECK(table[0].lambda == doctest::Approx(-1.0).epsilon(1e-7));
}
