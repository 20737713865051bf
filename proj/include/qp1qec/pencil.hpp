#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "qp1qec/errors.hpp"
#include "qp1qec/linalg.hpp"
#include "qp1qec/types.hpp"

namespace qp1qec {

namespace detail {

/// True when a symmetric matrix has eigenvalues on both sides of the scaled
/// tolerance band.
template <typename Scalar>
bool has_both_signs(const Matrix<Scalar>& s, Scalar psd_tol) {
  if (s.rows() == 0) return false;
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(s, Eigen::EigenvaluesOnly);
  const Scalar lo = es.eigenvalues()(0);
  const Scalar hi = es.eigenvalues()(s.rows() - 1);
  const Scalar band = psd_tol * std::max(std::abs(lo), std::abs(hi));
  return lo < -band && hi > band;
}

}  // namespace detail

/// The two Gram matrices of a constrained least-squares instance, with
/// indefiniteness flags at the configured eigenvalue band.
template <typename Scalar>
struct GramPair {
  Matrix<Scalar> a;
  Matrix<Scalar> b;
  bool a_indefinite = false;
  bool b_indefinite = false;

  static GramPair FromMatrices(Matrix<Scalar> a, Matrix<Scalar> b,
                               const ToleranceConfig<Scalar>& tol = {}) {
    if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
      throw DimensionError("gram matrices must be square and of equal size");
    GramPair out;
    out.a = ((a + a.transpose()) / Scalar(2)).eval();
    out.b = ((b + b.transpose()) / Scalar(2)).eval();
    out.a_indefinite = detail::has_both_signs(out.a, tol.psd_tol);
    out.b_indefinite = detail::has_both_signs(out.b, tol.psd_tol);
    return out;
  }

  template <typename DT, typename DV>
  static GramPair FromOperators(const Eigen::MatrixBase<DT>& t, const KreinSignature<Scalar>& jk,
                                const Eigen::MatrixBase<DV>& v, const KreinSignature<Scalar>& je,
                                const ToleranceConfig<Scalar>& tol = {}) {
    if (t.cols() != v.cols())
      throw DimensionError("objective and constraint operators act on different spaces");
    return FromMatrices(gram(t, jk), gram(v, je), tol);
  }
};

enum class IntervalKind { Empty, Point, Interval };

/// The set of shifts rho for which A + rho B is positive semidefinite. For a
/// Point both endpoints coincide; for Empty they are NaN.
template <typename Scalar>
struct PsdInterval {
  IntervalKind kind = IntervalKind::Empty;
  Scalar rho_minus = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar rho_plus = std::numeric_limits<Scalar>::quiet_NaN();

  Scalar midpoint() const { return (rho_minus + rho_plus) / Scalar(2); }
  Scalar half_width() const { return (rho_plus - rho_minus) / Scalar(2); }
};

namespace detail {

/// Smallest eigenvalue of a symmetric matrix.
template <typename Scalar>
Scalar min_eigenvalue(const Matrix<Scalar>& s) {
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

/// Magnitude reference for pencil eigenvalue thresholds at shift rho.
template <typename Scalar>
Scalar pencil_scale(const GramPair<Scalar>& pair, Scalar rho) {
  return Scalar(1) + pair.a.norm() + std::max(Scalar(1), std::abs(rho)) * pair.b.norm();
}

}  // namespace detail

/// Relative width below which a located PSD interval collapses to a Point.
/// A quadratic touch of lambda_min at zero is certifiable only to a width of
/// about sqrt(eps), so the collapse band sits well above that.
inline constexpr double kPointWidthRel = 1e-5;

/// Relative band around +-1/kappa used to split extreme eigenspaces from the
/// rest of the reduced spectrum.
inline constexpr double kExtremeBandRel = 1e-7;

/// Relative defect allowed between the extreme reduced eigenvalues and
/// +-1/kappa before the reduction is rejected as inconsistent.
inline constexpr double kExtremeCheckRel = 1e-8;

/// Locates the PSD set of the pencil A + rho B by maximizing the concave map
/// rho -> lambda_min(A + rho B) over an expanding bracket and bisecting for
/// the zero crossings on each side. Requires B indefinite (otherwise the map
/// does not decay in one of the directions and the search is meaningless).
template <typename Scalar>
PsdInterval<Scalar> psd_interval(const GramPair<Scalar>& pair,
                                 const ToleranceConfig<Scalar>& tol = {}) {
  tol.validate();
  if (pair.a.rows() == 0) throw DimensionError("empty pencil");
  if (!pair.b_indefinite)
    throw SemidefiniteError("constraint Gram matrix must have eigenvalues of both signs");

  // Directions annihilated by both forms pin lambda_min to a flat zero that
  // would mask the Point/Interval distinction. Projecting them out leaves the
  // PSD set untouched, so the search runs on the projected pencil.
  GramPair<Scalar> work = pair;
  {
    Matrix<Scalar> stacked(pair.a.rows() + pair.b.rows(), pair.a.cols());
    stacked.topRows(pair.a.rows()) = pair.a;
    stacked.bottomRows(pair.b.rows()) = pair.b;
    if (nullspace_basis(stacked, tol.rank_tol).cols() > 0) {
      const Matrix<Scalar> c = row_space_basis(stacked, tol.rank_tol);
      work = GramPair<Scalar>::FromMatrices(c.transpose() * pair.a * c,
                                            c.transpose() * pair.b * c, tol);
    }
  }

  const auto phi = [&](Scalar rho) -> Scalar {
    return detail::min_eigenvalue<Scalar>(work.a + rho * work.b);
  };

  // Expand until both endpoints are non-PSD and sit below the center value;
  // concavity of phi then guarantees the maximizer lies inside the bracket.
  Scalar lo = Scalar(-1), hi = Scalar(1);
  const Scalar fmid = phi(Scalar(0));
  for (int i = 0;; ++i) {
    const Scalar flo = phi(lo);
    if (flo < Scalar(0) && flo < fmid) break;
    if (i > 120) throw SemidefiniteError("bracket expansion failed; pencil never loses PSD");
    lo *= Scalar(2);
  }
  for (int i = 0;; ++i) {
    const Scalar fhi = phi(hi);
    if (fhi < Scalar(0) && fhi < fmid) break;
    if (i > 120) throw SemidefiniteError("bracket expansion failed; pencil never loses PSD");
    hi *= Scalar(2);
  }

  // Golden-section maximization of the concave eigenvalue map.
  const Scalar gr = (std::sqrt(Scalar(5)) - Scalar(1)) / Scalar(2);
  const Scalar wtol = tol.root_tol * std::max({Scalar(1), std::abs(lo), std::abs(hi)});
  Scalar a = lo, b = hi;
  Scalar c = b - gr * (b - a), d = a + gr * (b - a);
  Scalar fc = phi(c), fd = phi(d);
  for (int i = 0; (b - a) > wtol && i < 500; ++i) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = phi(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = phi(d);
    }
  }
  const Scalar rho_star = (a + b) / Scalar(2);
  const Scalar phi_star = std::max({fc, fd, phi(rho_star)});

  PsdInterval<Scalar> out;
  const Scalar neg_band = tol.psd_tol * detail::pencil_scale(work, rho_star);
  if (phi_star < -neg_band) {
    out.kind = IntervalKind::Empty;
    return out;
  }

  // Zero crossings of phi on either side of the maximizer, certified against
  // a machine-level slack so that exact-arithmetic zeros are kept. The
  // returned endpoint is the innermost certified iterate.
  const auto certified = [&](Scalar rho) -> bool {
    return phi(rho) >= -Scalar(64) * std::numeric_limits<Scalar>::epsilon() *
                           detail::pencil_scale(work, rho);
  };
  const auto crossing = [&](Scalar outside, Scalar inside) -> Scalar {
    Scalar neg = outside, psd = inside;
    for (int i = 0;
         std::abs(psd - neg) > tol.root_tol * std::max({Scalar(1), std::abs(psd), std::abs(neg)}) &&
         i < tol.max_iter;
         ++i) {
      const Scalar mid = (neg + psd) / Scalar(2);
      (certified(mid) ? psd : neg) = mid;
    }
    return psd;
  };
  out.rho_minus = crossing(lo, rho_star);
  out.rho_plus = crossing(hi, rho_star);

  const Scalar width_band =
      Scalar(kPointWidthRel) *
      std::max({Scalar(1), std::abs(out.rho_minus), std::abs(out.rho_plus)});
  if (out.rho_plus - out.rho_minus <= width_band) {
    out.kind = IntervalKind::Point;
    out.rho_minus = out.rho_plus = (out.rho_minus + out.rho_plus) / Scalar(2);
  } else {
    out.kind = IntervalKind::Interval;
  }
  return out;
}

/// Congruence reduction of the pencil at the interval midpoint:
/// M = A + rho_mid B (must be positive definite), G = M^{-1/2} B M^{-1/2},
/// so that A + lambda B = M^{1/2} (I + (lambda - rho_mid) G) M^{1/2}.
/// The reduced spectrum lives in [-1/kappa, 1/kappa] with both extremes
/// attained; eigenvectors are split into the extreme eigenspaces, their
/// strict-interior complements, and the kernel of G.
template <typename Scalar>
struct ReducedPencil {
  Scalar rho_mid = Scalar(0);
  Scalar kappa = Scalar(0);
  Matrix<Scalar> m;
  Matrix<Scalar> m_half;
  Matrix<Scalar> m_inv_half;
  Matrix<Scalar> g;
  SpectralDecomposition<Scalar> g_eig;  // descending

  std::vector<Index> n_plus;   ///< eigenvalues at +1/kappa
  std::vector<Index> n_minus;  ///< eigenvalues at -1/kappa
  std::vector<Index> d_plus;   ///< positive spectrum strictly inside
  std::vector<Index> d_minus;  ///< negative spectrum strictly inside
  std::vector<Index> zero;     ///< kernel of G

  /// Eigenvalue with the extreme entries snapped exactly to +-1/kappa, which
  /// keeps boundary denominators exact where the split says they vanish.
  Scalar snapped_eigenvalue(Index i) const {
    for (Index j : n_plus)
      if (j == i) return Scalar(1) / kappa;
    for (Index j : n_minus)
      if (j == i) return Scalar(-1) / kappa;
    return g_eig.eigenvalues(i);
  }

  /// Columns of the reduced eigenbasis selected by an index set.
  Matrix<Scalar> basis(const std::vector<Index>& idx) const {
    Matrix<Scalar> out(g_eig.eigenvectors.rows(), static_cast<Index>(idx.size()));
    for (Index k = 0; k < static_cast<Index>(idx.size()); ++k)
      out.col(k) = g_eig.eigenvectors.col(idx[static_cast<std::size_t>(k)]);
    return out;
  }
};

template <typename Scalar>
ReducedPencil<Scalar> reduce_pencil(const GramPair<Scalar>& pair,
                                    const PsdInterval<Scalar>& interval,
                                    const ToleranceConfig<Scalar>& tol = {}) {
  tol.validate();
  if (interval.kind != IntervalKind::Interval)
    throw InvalidProblemError("pencil reduction requires a nondegenerate PSD interval");

  ReducedPencil<Scalar> out;
  out.rho_mid = interval.midpoint();
  out.kappa = interval.half_width();
  Matrix<Scalar> m = pair.a + out.rho_mid * pair.b;
  out.m = (m + m.transpose()) / Scalar(2);
  // Throws SingularError when M is not positive definite at rank_tol; callers
  // route that case to the degenerate fallback.
  auto [half, inv_half] = psd_sqrt_pair(out.m, tol);
  out.m_half = std::move(half);
  out.m_inv_half = std::move(inv_half);
  Matrix<Scalar> g = out.m_inv_half * pair.b * out.m_inv_half;
  out.g = (g + g.transpose()) / Scalar(2);
  out.g_eig = sym_eig(out.g);

  const Index n = out.g.rows();
  const Scalar inv_kappa = Scalar(1) / out.kappa;
  const Scalar top = out.g_eig.eigenvalues(0);
  const Scalar bottom = out.g_eig.eigenvalues(n - 1);
  if (std::abs(top * out.kappa - Scalar(1)) > Scalar(kExtremeCheckRel) ||
      std::abs(bottom * out.kappa + Scalar(1)) > Scalar(kExtremeCheckRel))
    throw InvalidProblemError(
        "reduced spectrum does not attain +-1/kappa; interval and pencil are inconsistent");

  const Scalar extreme_band = Scalar(kExtremeBandRel) * inv_kappa;
  const Scalar zero_band = tol.rank_tol * inv_kappa;
  for (Index i = 0; i < n; ++i) {
    const Scalar lam = out.g_eig.eigenvalues(i);
    if (lam >= inv_kappa - extreme_band)
      out.n_plus.push_back(i);
    else if (lam <= -inv_kappa + extreme_band)
      out.n_minus.push_back(i);
    else if (std::abs(lam) <= zero_band)
      out.zero.push_back(i);
    else if (lam > Scalar(0))
      out.d_plus.push_back(i);
    else
      out.d_minus.push_back(i);
  }
  return out;
}

enum class SignClass { Negative, Neutral, Positive };

template <typename Scalar>
struct FormsValue {
  Scalar objective = Scalar(0);
  Scalar constraint = Scalar(0);
  SignClass sign = SignClass::Neutral;  ///< class of x' B x at the psd_tol band
};

/// Objective and constraint values at a point, plus the sign class of x
/// against the constraint Gram form.
template <typename Scalar>
FormsValue<Scalar> evaluate_forms(const Matrix<Scalar>& t, const KreinSignature<Scalar>& jk,
                                  const Matrix<Scalar>& v, const KreinSignature<Scalar>& je,
                                  const Vector<Scalar>& w0, const Vector<Scalar>& z0,
                                  const Vector<Scalar>& x, const ToleranceConfig<Scalar>& tol = {}) {
  if (t.cols() != x.size() || v.cols() != x.size())
    throw DimensionError("point dimension does not match the operators");
  if (w0.size() != t.rows() || z0.size() != v.rows())
    throw DimensionError("data dimensions do not match the operators");
  FormsValue<Scalar> out;
  const Vector<Scalar> tr = t * x - w0;
  const Vector<Scalar> vr = v * x - z0;
  out.objective = jk.product(tr, tr);
  out.constraint = je.product(vr, vr);
  const Matrix<Scalar> b = gram(v, je);
  const Scalar q = x.dot(b * x);
  const Scalar band = tol.psd_tol * b.norm() * x.squaredNorm();
  out.sign = q > band ? SignClass::Positive : (q < -band ? SignClass::Negative : SignClass::Neutral);
  return out;
}

}  // namespace qp1qec
