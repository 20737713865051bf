#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

#include <Eigen/Dense>

#include "qp1qec/linalg.hpp"
#include "qp1qec/oracle.hpp"
#include "qp1qec/problem.hpp"

namespace qp1qec {

namespace detail {

inline Matrix<double> random_orthogonal(oracle::detail::Rng& rng, Index n) {
  Matrix<double> g(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix<double>> qr(g);
  Matrix<double> q = qr.householderQ();
  const Matrix<double> r = qr.matrixQR();
  // Fixing the sign of diag(R) makes the distribution Haar and the output a
  // deterministic function of the Gaussian draw.
  for (Index j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

/// Factor a symmetric matrix as F' J F with J = diag(+-1), discarding
/// eigendirections with negligible weight so F keeps full row rank.
inline std::pair<Matrix<double>, KreinSignature<double>> signed_factor(const Matrix<double>& s) {
  const SpectralDecomposition<double> es = sym_eig(s);
  const Index n = s.rows();
  const double cutoff = 1e-12 * es.eigenvalues.cwiseAbs().maxCoeff();
  Index kept = 0;
  for (Index i = 0; i < n; ++i)
    if (std::abs(es.eigenvalues(i)) > cutoff) ++kept;
  Matrix<double> f(kept, n);
  Vector<double> signs(kept);
  Index r = 0;
  for (Index i = 0; i < n; ++i) {
    const double lam = es.eigenvalues(i);
    if (std::abs(lam) <= cutoff) continue;
    f.row(r) = std::sqrt(std::abs(lam)) * es.eigenvectors.col(i).transpose();
    signs(r) = lam > 0 ? 1.0 : -1.0;
    ++r;
  }
  return {std::move(f), KreinSignature<double>::FromSigns(signs)};
}

}  // namespace detail

/// Build a random instance whose admissible shift set is the planted interval
/// [rho_minus, rho_plus], with both extreme eigenspaces attained and the
/// midpoint pencil positive definite. The same (n, seed, interval) triple
/// always produces bit-identical data on every platform.
inline Problem<double> generate_problem(Index n, std::uint64_t seed, double rho_minus = 0.5,
                                        double rho_plus = 1.0) {
  if (n < 2) throw InvalidProblemError("generated instances need n >= 2");
  if (!(rho_minus < rho_plus))
    throw InvalidProblemError("the planted interval needs rho_minus < rho_plus");

  const double kappa = (rho_plus - rho_minus) / 2.0;
  const double rho_mid = (rho_plus + rho_minus) / 2.0;
  const double inv_k = 1.0 / kappa;

  oracle::detail::Rng spectrum_rng(seed, 0);
  oracle::detail::Rng basis_rng(seed, 1);
  oracle::detail::Rng data_rng(seed, 2);

  // Plant the reduced spectrum: extremes pinned at +-1/kappa so the interval
  // endpoints are met, interior free inside the open band.
  Vector<double> g_spec(n);
  g_spec(0) = inv_k;
  g_spec(n - 1) = -inv_k;
  for (Index i = 1; i + 1 < n; ++i) g_spec(i) = inv_k * (2.0 * spectrum_rng.uniform() - 1.0);

  Vector<double> m_spec(n);
  for (Index i = 0; i < n; ++i) m_spec(i) = 0.5 + 1.5 * spectrum_rng.uniform();

  const Matrix<double> qg = detail::random_orthogonal(basis_rng, n);
  const Matrix<double> qm = detail::random_orthogonal(basis_rng, n);
  const Matrix<double> g = qg * g_spec.asDiagonal() * qg.transpose();
  const Matrix<double> m = qm * m_spec.asDiagonal() * qm.transpose();
  const Matrix<double> m_half = qm * m_spec.cwiseSqrt().asDiagonal() * qm.transpose();

  // With B = M^{1/2} G M^{1/2} and A = M - rho_mid B, the pencil A + rho B is
  // congruent to I + (rho - rho_mid) G, so it is PSD exactly on the interval.
  Matrix<double> b = m_half * g * m_half;
  b = ((b + b.transpose()) / 2.0).eval();
  Matrix<double> a = m - rho_mid * b;
  a = ((a + a.transpose()) / 2.0).eval();

  auto [t, jk] = detail::signed_factor(a);
  auto [v, je] = detail::signed_factor(b);

  Problem<double> p;
  p.t = std::move(t);
  p.jk = std::move(jk);
  p.v = std::move(v);
  p.je = std::move(je);
  p.w0 = Vector<double>(p.t.rows());
  for (Index i = 0; i < p.w0.size(); ++i) p.w0(i) = data_rng.normal();
  p.z0 = Vector<double>(p.v.rows());
  for (Index i = 0; i < p.z0.size(); ++i) p.z0(i) = data_rng.normal();
  return p;
}

}  // namespace qp1qec
