#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qp1qec/linalg.hpp"
#include "qp1qec/oracle.hpp"
#include "qp1qec/pencil.hpp"
#include "qp1qec/problem.hpp"

namespace qp1qec {

// ---------------------------------------------------------------------------
// Deflation of directions invisible to both operators.

/// Splitting of the domain into N(T) ∩ N(V) and its orthogonal complement.
/// The objective and the constraint are invariant along the null part, so the
/// solve runs on the complement and the null basis is reported as free
/// directions of every solution.
template <typename Scalar>
struct DeflatedProblem {
  Matrix<Scalar> null_basis;  ///< orthonormal columns spanning N(T) ∩ N(V)
  Matrix<Scalar> q;           ///< orthonormal basis of the complement
  Matrix<Scalar> t_r;         ///< T restricted to the complement
  Matrix<Scalar> v_r;         ///< V restricted to the complement
};

template <typename Scalar>
DeflatedProblem<Scalar> deflate(const Problem<Scalar>& problem) {
  Matrix<Scalar> stacked(problem.mk() + problem.me(), problem.n());
  stacked.topRows(problem.mk()) = problem.t;
  stacked.bottomRows(problem.me()) = problem.v;
  DeflatedProblem<Scalar> out;
  out.null_basis = nullspace_basis(stacked, problem.tol.rank_tol);
  if (out.null_basis.cols() == 0)
    out.q = Matrix<Scalar>::Identity(problem.n(), problem.n());
  else
    out.q = row_space_basis(stacked, problem.tol.rank_tol);
  out.t_r = problem.t * out.q;
  out.v_r = problem.v * out.q;
  return out;
}

// ---------------------------------------------------------------------------
// Right-hand side of the reduced projection problem.

/// After substituting x = x0 + Q M^{-1/2} y the problem becomes: find the
/// closest point to u0 on the cone of G in the Euclidean norm. The rhs is
/// stored together with its orthogonal components along the five spectral
/// classes of G.
template <typename Scalar>
struct ReducedRhs {
  Vector<Scalar> x0;       ///< base point of the constraint manifold, V x0 = z0
  Vector<Scalar> u0;       ///< reduced right-hand side
  Vector<Scalar> v_plus;   ///< component on the +1/kappa eigenspace
  Vector<Scalar> w_plus;   ///< component on the interior positive spectrum
  Vector<Scalar> v_minus;  ///< component on the -1/kappa eigenspace
  Vector<Scalar> w_minus;  ///< component on the interior negative spectrum
  Vector<Scalar> u0_zero;  ///< component on the kernel of G
};

template <typename Scalar>
ReducedRhs<Scalar> reduced_rhs(const Problem<Scalar>& problem, const DeflatedProblem<Scalar>& deflated,
                               const ReducedPencil<Scalar>& pencil) {
  ReducedRhs<Scalar> out;
  out.x0 = base_point(problem.v, problem.z0, problem.tol);
  const Vector<Scalar> resid = problem.w0 - problem.t * out.x0;
  out.u0 = pencil.m_inv_half * (indefinite_adjoint(deflated.t_r, problem.jk) * resid);
  const Vector<Scalar> c = pencil.g_eig.eigenvectors.transpose() * out.u0;
  const auto component = [&](const std::vector<Index>& idx) {
    Vector<Scalar> v = Vector<Scalar>::Zero(out.u0.size());
    for (Index i : idx) v += c(i) * pencil.g_eig.eigenvectors.col(i);
    return v;
  };
  out.v_plus = component(pencil.n_plus);
  out.w_plus = component(pencil.d_plus);
  out.v_minus = component(pencil.n_minus);
  out.w_minus = component(pencil.d_minus);
  out.u0_zero = component(pencil.zero);
  return out;
}

// ---------------------------------------------------------------------------
// Secular equation.

/// Diagonalized data of the secular equation: the snapped spectrum of G, the
/// rhs in eigencoordinates, and the spectral class index sets.
template <typename Scalar>
struct SecularSystem {
  Scalar kappa = Scalar(0);
  Vector<Scalar> eigenvalues;  ///< descending, extremes snapped to +-1/kappa
  Vector<Scalar> c;            ///< rhs coordinates in the eigenbasis
  std::vector<Index> n_plus, n_minus, d_plus, d_minus, zero;
};

template <typename Scalar>
SecularSystem<Scalar> make_secular_system(const ReducedPencil<Scalar>& pencil,
                                          const ReducedRhs<Scalar>& rhs) {
  SecularSystem<Scalar> sys;
  sys.kappa = pencil.kappa;
  const Index n = pencil.g.rows();
  sys.eigenvalues.resize(n);
  for (Index i = 0; i < n; ++i) sys.eigenvalues(i) = pencil.snapped_eigenvalue(i);
  sys.c = pencil.g_eig.eigenvectors.transpose() * rhs.u0;
  sys.n_plus = pencil.n_plus;
  sys.n_minus = pencil.n_minus;
  sys.d_plus = pencil.d_plus;
  sys.d_minus = pencil.d_minus;
  sys.zero = pencil.zero;
  return sys;
}

/// Direct construction from a given spectrum; classification mirrors the
/// pencil reduction. Mostly useful for diagnostics and tests.
template <typename Scalar>
SecularSystem<Scalar> make_secular_system(Scalar kappa, Vector<Scalar> eigenvalues, Vector<Scalar> c,
                                          const ToleranceConfig<Scalar>& tol = {}) {
  SecularSystem<Scalar> sys;
  sys.kappa = kappa;
  sys.eigenvalues = std::move(eigenvalues);
  sys.c = std::move(c);
  const Scalar inv_k = Scalar(1) / kappa;
  const Scalar extreme_band = Scalar(kExtremeBandRel) * inv_k;
  const Scalar zero_band = tol.rank_tol * inv_k;
  for (Index i = 0; i < sys.eigenvalues.size(); ++i) {
    const Scalar lam = sys.eigenvalues(i);
    if (lam >= inv_k - extreme_band) {
      sys.n_plus.push_back(i);
      sys.eigenvalues(i) = inv_k;
    } else if (lam <= -inv_k + extreme_band) {
      sys.n_minus.push_back(i);
      sys.eigenvalues(i) = -inv_k;
    } else if (std::abs(lam) <= zero_band) {
      sys.zero.push_back(i);
    } else if (lam > Scalar(0)) {
      sys.d_plus.push_back(i);
    } else {
      sys.d_minus.push_back(i);
    }
  }
  return sys;
}

/// Values (g_plus, g_minus) of the two halves of the secular function at tau.
/// The extreme blocks are evaluated in closed form so that at tau = -+kappa
/// the blocked denominator is exactly zero and the block is dropped
/// (pseudoinverse semantics); the interior blocks never vanish.
template <typename Scalar>
std::pair<Scalar, Scalar> secular_eval(const SecularSystem<Scalar>& sys, Scalar tau) {
  const Scalar k = sys.kappa;
  if (std::abs(tau) > k) throw std::domain_error("secular evaluation outside [-kappa, kappa]");
  Scalar vp2 = Scalar(0), vm2 = Scalar(0);
  for (Index i : sys.n_plus) vp2 += sys.c(i) * sys.c(i);
  for (Index i : sys.n_minus) vm2 += sys.c(i) * sys.c(i);
  Scalar gp = Scalar(0), gm = Scalar(0);
  if (k + tau > Scalar(0)) gp += k * vp2 / ((k + tau) * (k + tau));
  if (k - tau > Scalar(0)) gm += k * vm2 / ((k - tau) * (k - tau));
  for (Index i : sys.d_plus) {
    const Scalar den = Scalar(1) + tau * sys.eigenvalues(i);
    gp += sys.eigenvalues(i) * sys.c(i) * sys.c(i) / (den * den);
  }
  for (Index i : sys.d_minus) {
    const Scalar den = Scalar(1) + tau * sys.eigenvalues(i);
    gm += -sys.eigenvalues(i) * sys.c(i) * sys.c(i) / (den * den);
  }
  return {gp, gm};
}

template <typename Scalar>
std::pair<Scalar, Scalar> secular_eval(const ReducedPencil<Scalar>& pencil,
                                       const ReducedRhs<Scalar>& rhs, Scalar tau) {
  return secular_eval(make_secular_system(pencil, rhs), tau);
}

/// Solution set of the reduced projection problem: a single point, or a
/// sphere of equioptimal points centered at `center` inside the affine slice
/// center + alpha * (unit sphere of sphere_basis's span).
enum class ThetaKind { Singleton, Sphere };

template <typename Scalar>
struct ThetaSet {
  ThetaKind kind = ThetaKind::Singleton;
  Vector<Scalar> center;
  Scalar gamma = Scalar(0);
  Scalar alpha = Scalar(0);
  Matrix<Scalar> sphere_basis;  ///< orthonormal columns; zero columns for singletons
};

enum class SecularStatus { Found, NoThetaPlus, NoThetaMinus };

template <typename Scalar>
struct SecularOutcome {
  SecularStatus status = SecularStatus::Found;
  ThetaSet<Scalar> theta;
};

namespace detail {

template <typename Scalar>
Scalar secular_h(const SecularSystem<Scalar>& sys, Scalar tau) {
  const auto [gp, gm] = secular_eval(sys, tau);
  return gp - gm;
}

/// d/dtau of the secular difference; strictly negative on the open interval.
template <typename Scalar>
Scalar secular_dh(const SecularSystem<Scalar>& sys, Scalar tau) {
  Scalar s = Scalar(0);
  for (Index i = 0; i < sys.eigenvalues.size(); ++i) {
    const Scalar lam = sys.eigenvalues(i);
    const Scalar den = Scalar(1) + tau * lam;
    s += lam * lam * sys.c(i) * sys.c(i) / (den * den * den);
  }
  return Scalar(-2) * s;
}

/// Stationary point coordinates y_i = c_i / (1 + gamma lam_i) with exact
/// blocking of the requested extreme class.
template <typename Scalar>
Vector<Scalar> secular_point(const SecularSystem<Scalar>& sys, Scalar gamma, bool drop_plus,
                             bool drop_minus) {
  const Scalar k = sys.kappa;
  Vector<Scalar> y = sys.c;
  for (Index i : sys.n_plus) y(i) = drop_plus ? Scalar(0) : sys.c(i) * k / (k + gamma);
  for (Index i : sys.n_minus) y(i) = drop_minus ? Scalar(0) : sys.c(i) * k / (k - gamma);
  for (Index i : sys.d_plus) y(i) = sys.c(i) / (Scalar(1) + gamma * sys.eigenvalues(i));
  for (Index i : sys.d_minus) y(i) = sys.c(i) / (Scalar(1) + gamma * sys.eigenvalues(i));
  return y;
}

template <typename Scalar>
Matrix<Scalar> unit_columns(Index n, const std::vector<Index>& idx) {
  Matrix<Scalar> out = Matrix<Scalar>::Zero(n, static_cast<Index>(idx.size()));
  for (Index k = 0; k < out.cols(); ++k) out(idx[static_cast<std::size_t>(k)], k) = Scalar(1);
  return out;
}

}  // namespace detail

/// Solves the secular equation in eigencoordinates. Case order: rhs inside
/// N(G) (feasible as-is), boundary sphere at +kappa, boundary sphere at
/// -kappa, interior bisection for the unique root of the strictly decreasing
/// difference. `bracket_margin` optionally shrinks the initial interior
/// bracket (used by reproducibility checks); the root is unaffected.
template <typename Scalar>
SecularOutcome<Scalar> secular_solve(const SecularSystem<Scalar>& sys,
                                     const ToleranceConfig<Scalar>& tol = {},
                                     Scalar bracket_margin = Scalar(0)) {
  tol.validate();
  const Scalar k = sys.kappa;
  const Index n = sys.c.size();
  const Scalar unorm = sys.c.norm();
  SecularOutcome<Scalar> out;
  out.theta.center = sys.c;
  out.theta.sphere_basis = Matrix<Scalar>::Zero(n, 0);

  Scalar outside2 = Scalar(0);
  for (Index i : sys.n_plus) outside2 += sys.c(i) * sys.c(i);
  for (Index i : sys.n_minus) outside2 += sys.c(i) * sys.c(i);
  for (Index i : sys.d_plus) outside2 += sys.c(i) * sys.c(i);
  for (Index i : sys.d_minus) outside2 += sys.c(i) * sys.c(i);
  if (std::sqrt(outside2) <= tol.rank_tol * unorm) {
    // rhs lies in the kernel: it is feasible and the projection is itself.
    out.theta = {ThetaKind::Singleton, sys.c, Scalar(0), Scalar(0), Matrix<Scalar>::Zero(n, 0)};
    return out;
  }

  Scalar vp = Scalar(0), vm = Scalar(0);
  for (Index i : sys.n_plus) vp += sys.c(i) * sys.c(i);
  for (Index i : sys.n_minus) vm += sys.c(i) * sys.c(i);
  vp = std::sqrt(vp);
  vm = std::sqrt(vm);
  const bool vp_zero = vp <= tol.rank_tol * unorm;
  const bool vm_zero = vm <= tol.rank_tol * unorm;

  if (vm_zero) {
    const Scalar hk = detail::secular_h(sys, k);
    if (hk >= Scalar(0)) {
      const Scalar alpha = std::sqrt(std::max(Scalar(0), k * hk));
      const Vector<Scalar> center = detail::secular_point(sys, k, false, true);
      if (sys.n_minus.empty()) {
        if (alpha * alpha > tol.residual_tol * (Scalar(1) + unorm * unorm)) {
          out.status = SecularStatus::NoThetaMinus;
          return out;
        }
        out.theta = {ThetaKind::Singleton, center, k, Scalar(0), Matrix<Scalar>::Zero(n, 0)};
        return out;
      }
      out.theta = {ThetaKind::Sphere, center, k, alpha, detail::unit_columns<Scalar>(n, sys.n_minus)};
      return out;
    }
  }
  if (vp_zero) {
    const Scalar hmk = detail::secular_h(sys, -k);
    if (hmk <= Scalar(0)) {
      const Scalar alpha = std::sqrt(std::max(Scalar(0), -k * hmk));
      const Vector<Scalar> center = detail::secular_point(sys, -k, true, false);
      if (sys.n_plus.empty()) {
        if (alpha * alpha > tol.residual_tol * (Scalar(1) + unorm * unorm)) {
          out.status = SecularStatus::NoThetaPlus;
          return out;
        }
        out.theta = {ThetaKind::Singleton, center, -k, Scalar(0), Matrix<Scalar>::Zero(n, 0)};
        return out;
      }
      out.theta = {ThetaKind::Sphere, center, -k, alpha, detail::unit_columns<Scalar>(n, sys.n_plus)};
      return out;
    }
  }

  // Interior root. The case analysis above guarantees the difference is
  // positive toward -kappa and negative toward +kappa.
  Scalar lo = -k, hi = k;
  if (bracket_margin > Scalar(0)) {
    const Scalar lo2 = -k * (Scalar(1) - bracket_margin);
    const Scalar hi2 = k * (Scalar(1) - bracket_margin);
    if (detail::secular_h(sys, lo2) > Scalar(0)) lo = lo2;
    if (detail::secular_h(sys, hi2) < Scalar(0)) hi = hi2;
  }
  for (int i = 0; i < tol.max_iter && (hi - lo) > tol.root_tol * k; ++i) {
    const Scalar mid = (lo + hi) / Scalar(2);
    (detail::secular_h(sys, mid) > Scalar(0) ? lo : hi) = mid;
  }
  Scalar gamma = (lo + hi) / Scalar(2);
  // A few guarded Newton steps drive the residual of the root to machine
  // level, which keeps the constraint defect of the assembled point small
  // even when the root sits close to the boundary.
  for (int i = 0; i < 4; ++i) {
    const Scalar hv = detail::secular_h(sys, gamma);
    const Scalar hd = detail::secular_dh(sys, gamma);
    if (!(hd < Scalar(0))) break;
    const Scalar next = gamma - hv / hd;
    if (!(next > -k && next < k)) break;
    gamma = next;
  }
  out.theta = {ThetaKind::Singleton, detail::secular_point(sys, gamma, false, false), gamma,
               Scalar(0), Matrix<Scalar>::Zero(n, 0)};
  return out;
}

/// Secular solve in the reduced y-space: eigencoordinate results are rotated
/// back through the eigenbasis of G.
template <typename Scalar>
SecularOutcome<Scalar> secular_solve(const ReducedPencil<Scalar>& pencil, const ReducedRhs<Scalar>& rhs,
                                     const ToleranceConfig<Scalar>& tol = {},
                                     Scalar bracket_margin = Scalar(0)) {
  SecularOutcome<Scalar> out = secular_solve(make_secular_system(pencil, rhs), tol, bracket_margin);
  if (out.status == SecularStatus::Found) {
    out.theta.center = pencil.g_eig.eigenvectors * out.theta.center;
    out.theta.sphere_basis = pencil.g_eig.eigenvectors * out.theta.sphere_basis;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Solution assembly and verification.

/// Affine description of the full solution set: particular center, optional
/// equioptimal ellipsoid (members = particular + ellipsoid_map * c over
/// ||c|| = radius), and the free null directions shared by both operators.
template <typename Scalar>
struct SolutionSet {
  Vector<Scalar> particular;
  Scalar lambda = Scalar(0);
  Matrix<Scalar> ellipsoid_map;  ///< zero columns when the solution is unique
  Scalar radius = Scalar(0);
  Matrix<Scalar> null_part;
  Scalar min_value = Scalar(0);

  Vector<Scalar> member(const Vector<Scalar>& coords) const {
    return particular + ellipsoid_map * coords;
  }
  /// A concrete member of the set (the center itself when it is unique).
  Vector<Scalar> representative() const {
    if (ellipsoid_map.cols() == 0) return particular;
    return particular + radius * ellipsoid_map.col(0);
  }
};

template <typename Scalar>
SolutionSet<Scalar> assemble_solution(const Problem<Scalar>& problem,
                                      const DeflatedProblem<Scalar>& deflated,
                                      const ReducedPencil<Scalar>& pencil, const ReducedRhs<Scalar>& rhs,
                                      const ThetaSet<Scalar>& theta) {
  SolutionSet<Scalar> out;
  out.particular = rhs.x0 + deflated.q * (pencil.m_inv_half * theta.center);
  out.lambda = pencil.rho_mid + theta.gamma;
  out.ellipsoid_map = deflated.q * (pencil.m_inv_half * theta.sphere_basis);
  out.radius = theta.alpha;
  out.null_part = deflated.null_basis;
  out.min_value = problem.objective(out.representative());
  return out;
}

/// Certificate that a point at a given shift is a constrained minimizer:
/// stationarity, feasibility, admissibility of the shift, semidefiniteness of
/// the shifted pencil, and orthogonality of the residual to the feasible
/// tangent through the base point. All residuals are scaled by the problem
/// magnitude; `passed` compares them against residual_tol.
template <typename Scalar>
struct VerificationReport {
  Scalar normal_residual = Scalar(0);
  Scalar constraint_residual = Scalar(0);
  Scalar orthogonality_residual = Scalar(0);
  bool lambda_in_interval = false;
  bool pencil_psd = false;
  Scalar pencil_min_eigenvalue = Scalar(0);
  Scalar tolerance = Scalar(0);

  bool passed() const {
    return normal_residual <= tolerance && constraint_residual <= tolerance &&
           orthogonality_residual <= tolerance && lambda_in_interval && pencil_psd;
  }
};

template <typename Scalar>
VerificationReport<Scalar> verify_solution(const Problem<Scalar>& problem, const Vector<Scalar>& x,
                                           Scalar lambda) {
  const GramPair<Scalar> pair = problem.grams();
  const Scalar sc = problem_scale(problem, pair);
  VerificationReport<Scalar> rep;
  rep.tolerance = problem.tol.residual_tol;

  const Vector<Scalar> rhs = indefinite_adjoint(problem.t, problem.jk) * problem.w0 +
                             lambda * (indefinite_adjoint(problem.v, problem.je) * problem.z0);
  rep.normal_residual = ((pair.a + lambda * pair.b) * x - rhs).norm() / sc;
  rep.constraint_residual = std::abs(problem.constraint(x)) / sc;

  const PsdInterval<Scalar> interval = psd_interval(pair, problem.tol);
  if (interval.kind != IntervalKind::Empty) {
    const Scalar slack = problem.tol.root_tol * std::max({Scalar(1), std::abs(interval.rho_minus),
                                                          std::abs(interval.rho_plus)});
    rep.lambda_in_interval =
        lambda >= interval.rho_minus - slack && lambda <= interval.rho_plus + slack;
  }
  Matrix<Scalar> s = pair.a + lambda * pair.b;
  s = ((s + s.transpose()) / Scalar(2)).eval();
  rep.pencil_min_eigenvalue = detail::min_eigenvalue<Scalar>(s);
  rep.pencil_psd =
      rep.pencil_min_eigenvalue >= -problem.tol.psd_tol * detail::pencil_scale(pair, lambda);

  const Vector<Scalar> x0 = base_point(problem.v, problem.z0, problem.tol);
  rep.orthogonality_residual =
      std::abs(problem.jk.product(problem.t * x - problem.w0, problem.t * (x - x0))) / sc;
  return rep;
}

// ---------------------------------------------------------------------------
// Full solve.

enum class SolveStatus { Solved, UnboundedBelow, InfimumNotAttained, Degenerate };

/// Why the grid-based fallback ran (None when the main reduction applied).
enum class FallbackReason { None, PointInterval, SingularMidpoint };

template <typename Scalar>
struct SolveDiagnostics {
  PsdInterval<Scalar> interval;
  Scalar kappa = std::numeric_limits<Scalar>::quiet_NaN();
  Index null_dim = 0;
  Index dim_n_plus = 0, dim_n_minus = 0, dim_d_plus = 0, dim_d_minus = 0, dim_n_g = 0;
  bool reduced = false;  ///< whether the congruence reduction ran
};

template <typename Scalar>
struct SolveOutcome {
  SolveStatus status = SolveStatus::Degenerate;
  std::optional<SolutionSet<Scalar>> solution;
  std::optional<Vector<Scalar>> certificate;  ///< descent direction when unbounded
  std::optional<VerificationReport<Scalar>> verification;
  FallbackReason fallback = FallbackReason::None;
  std::string detail;
  SolveDiagnostics<Scalar> diagnostics;
};

namespace detail {

/// Root of q(c) = c' qq c + 2 l' c + c0 or nullopt when the slice provably
/// misses zero. `band` absorbs roundoff in the constant term; `rank_band`
/// classifies negligible quadratic/linear parts.
template <typename Scalar>
std::optional<Vector<Scalar>> quadratic_slice_root(const Matrix<Scalar>& qq, const Vector<Scalar>& l,
                                                   Scalar c0, Scalar band, Scalar rank_band) {
  const Index d = qq.rows();
  if (std::abs(c0) <= band) return Vector<Scalar>::Zero(d);
  if (d == 0) return std::nullopt;

  if (qq.norm() <= rank_band) {
    if (l.norm() <= rank_band) return std::nullopt;
    return Vector<Scalar>(-c0 / (Scalar(2) * l.squaredNorm()) * l);
  }

  const SpectralDecomposition<Scalar> eig = sym_eig(qq);
  const Scalar dmax = eig.eigenvalues(0), dmin = eig.eigenvalues(d - 1);
  const Scalar eig_band = rank_band / std::max(Scalar(1), std::sqrt(Scalar(d)));
  const Vector<Scalar> lw = eig.eigenvectors.transpose() * l;

  if (dmax > eig_band && dmin < -eig_band) {
    // Indefinite slice: walk a line where the quadratic part cancels.
    const Scalar th = std::sqrt(dmax / -dmin);
    for (const Scalar sgn : {Scalar(1), Scalar(-1)}) {
      const Scalar slope = lw(0) + sgn * th * lw(d - 1);
      if (std::abs(slope) > eig_band) {
        Vector<Scalar> z = Vector<Scalar>::Zero(d);
        const Scalar s = -c0 / (Scalar(2) * slope);
        z(0) = s;
        z(d - 1) = sgn * th * s;
        return Vector<Scalar>(eig.eigenvectors * z);
      }
    }
    // No linear coupling on the two-plane: a pure quadratic root exists.
    Vector<Scalar> z = Vector<Scalar>::Zero(d);
    if (c0 < Scalar(0))
      z(0) = std::sqrt(-c0 / dmax);
    else
      z(d - 1) = std::sqrt(c0 / -dmin);
    return Vector<Scalar>(eig.eigenvectors * z);
  }

  // Semidefinite slice; flip so that the form is nonnegative.
  const Scalar flip = dmax > eig_band ? Scalar(1) : Scalar(-1);
  const Vector<Scalar> lam = flip * eig.eigenvalues;
  const Vector<Scalar> lf = flip * lw;
  const Scalar cf = flip * c0;

  // Escape along the numerical kernel when the linear term reaches into it.
  Index top = 0;
  Vector<Scalar> z = Vector<Scalar>::Zero(d);
  Scalar qmin = cf;
  for (Index i = 0; i < d; ++i) {
    if (lam(i) > eig_band) {
      z(i) = -lf(i) / lam(i);
      qmin -= lf(i) * lf(i) / lam(i);
      if (lam(i) > lam(top)) top = i;
    } else if (std::abs(lf(i)) > eig_band) {
      Vector<Scalar> esc = Vector<Scalar>::Zero(d);
      esc(i) = -cf / (Scalar(2) * lf(i));
      return Vector<Scalar>(eig.eigenvectors * esc);
    }
  }
  if (qmin > band) return std::nullopt;
  if (qmin < Scalar(0)) z(top) += std::sqrt(-qmin / lam(top));
  return Vector<Scalar>(eig.eigenvectors * z);
}

/// One shot of the fallback at a fixed shift: pseudoinverse stationary point,
/// consistency check, and a feasibility root over the pencil kernel slice.
template <typename Scalar>
struct ShiftAttempt {
  bool consistent = false;
  Scalar constraint_at_stationary = std::numeric_limits<Scalar>::quiet_NaN();
  std::optional<Vector<Scalar>> x;
  VerificationReport<Scalar> report;
};

template <typename Scalar>
ShiftAttempt<Scalar> attempt_shift(const Problem<Scalar>& problem,
                                   const DeflatedProblem<Scalar>& deflated,
                                   const GramPair<Scalar>& pair, Scalar lambda) {
  const auto& tol = problem.tol;
  ShiftAttempt<Scalar> out;
  const Matrix<Scalar> s = pair.a + lambda * pair.b;
  const Vector<Scalar> vz = indefinite_adjoint(deflated.v_r, problem.je) * problem.z0;
  const Vector<Scalar> rhs = indefinite_adjoint(deflated.t_r, problem.jk) * problem.w0 + lambda * vz;
  const Vector<Scalar> xr = moore_penrose<Scalar>(s, tol.rank_tol) * rhs;
  const Scalar sc = Scalar(1) + pair.a.norm() + pair.b.norm() + problem.w0.norm() + problem.z0.norm();
  if ((s * xr - rhs).norm() > tol.residual_tol * sc) return out;
  out.consistent = true;
  out.constraint_at_stationary = problem.constraint(deflated.q * xr);

  const Matrix<Scalar> kernel = nullspace_basis(s, tol.rank_tol);
  const Matrix<Scalar> qq = kernel.transpose() * pair.b * kernel;
  const Vector<Scalar> l = kernel.transpose() * (pair.b * xr - vz);
  const auto root = quadratic_slice_root<Scalar>(qq, l, out.constraint_at_stationary,
                                                 tol.residual_tol * sc, tol.rank_tol * sc);
  if (!root) return out;
  const Vector<Scalar> x = deflated.q * (xr + kernel * *root);
  const VerificationReport<Scalar> rep = verify_solution(problem, x, lambda);
  if (!rep.passed()) return out;
  out.x = x;
  out.report = rep;
  return out;
}

}  // namespace detail

/// Fallback for shifts where the congruence reduction is unavailable (point
/// interval, or singular midpoint pencil): sweep a fixed shift grid, refine
/// any feasibility sign change by bisection, and accept only points that pass
/// the full verification. A verified point is a certified global minimizer;
/// absence of one is reported honestly as a degenerate outcome.
template <typename Scalar>
SolveOutcome<Scalar> solve_degenerate(const Problem<Scalar>& problem,
                                      const DeflatedProblem<Scalar>& deflated,
                                      const GramPair<Scalar>& pair, const PsdInterval<Scalar>& interval,
                                      FallbackReason reason) {
  SolveOutcome<Scalar> out;
  out.fallback = reason;
  out.diagnostics.interval = interval;
  out.diagnostics.null_dim = deflated.null_basis.cols();

  std::vector<Scalar> grid;
  if (interval.kind == IntervalKind::Point) {
    grid.push_back(interval.rho_minus);
  } else {
    grid.push_back(interval.rho_minus);
    for (int k = 1; k <= 11; ++k)
      grid.push_back(interval.rho_minus +
                     (interval.rho_plus - interval.rho_minus) * Scalar(k) / Scalar(12));
    grid.push_back(interval.rho_plus);
  }

  const auto accept = [&](const detail::ShiftAttempt<Scalar>& attempt, Scalar lambda) {
    SolutionSet<Scalar> sol;
    sol.particular = *attempt.x;
    sol.lambda = lambda;
    sol.ellipsoid_map = Matrix<Scalar>::Zero(problem.n(), 0);
    sol.null_part = deflated.null_basis;
    sol.min_value = problem.objective(*attempt.x);
    out.status = SolveStatus::Solved;
    out.solution = std::move(sol);
    out.verification = attempt.report;
  };

  std::vector<detail::ShiftAttempt<Scalar>> attempts;
  attempts.reserve(grid.size());
  for (const Scalar lambda : grid) {
    attempts.push_back(detail::attempt_shift(problem, deflated, pair, lambda));
    if (attempts.back().x) {
      accept(attempts.back(), lambda);
      return out;
    }
  }

  // Feasibility of the stationary curve changed sign between two consistent
  // grid shifts: bisect for the crossing and retry there.
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    if (!attempts[i].consistent || !attempts[i + 1].consistent) continue;
    const Scalar ca = attempts[i].constraint_at_stationary;
    const Scalar cb = attempts[i + 1].constraint_at_stationary;
    if (!(ca * cb < Scalar(0))) continue;
    Scalar la = grid[i], lb = grid[i + 1];
    Scalar sign_a = ca;
    for (int it = 0; it < 80; ++it) {
      const Scalar mid = (la + lb) / Scalar(2);
      const auto attempt = detail::attempt_shift(problem, deflated, pair, mid);
      if (attempt.x) {
        accept(attempt, mid);
        return out;
      }
      if (!attempt.consistent) break;
      if (attempt.constraint_at_stationary * sign_a > Scalar(0)) {
        la = mid;
        sign_a = attempt.constraint_at_stationary;
      } else {
        lb = mid;
      }
    }
  }

  out.status = SolveStatus::Degenerate;
  out.detail = "no verified stationary point found on the admissible shift set";
  return out;
}

/// Full orchestration: deflate, locate the PSD interval, and dispatch on its
/// kind. Empty: unbounded below, with a sampled descent certificate. Interval
/// with a definite midpoint: congruence reduction + secular solve, verified.
/// Point interval or singular midpoint: verified grid fallback.
template <typename Scalar>
SolveOutcome<Scalar> solve(const Problem<Scalar>& problem,
                           const oracle::SampleConfig& certificate_config = {0x51ce7b1u, 4096, 40}) {
  problem.validate();
  const DeflatedProblem<Scalar> deflated = deflate(problem);
  const GramPair<Scalar> pair =
      GramPair<Scalar>::FromOperators(deflated.t_r, problem.jk, deflated.v_r, problem.je, problem.tol);
  const PsdInterval<Scalar> interval = psd_interval(pair, problem.tol);

  if (interval.kind == IntervalKind::Empty) {
    SolveOutcome<Scalar> out;
    out.status = SolveStatus::UnboundedBelow;
    out.diagnostics.interval = interval;
    out.diagnostics.null_dim = deflated.null_basis.cols();
    const auto dir =
        oracle::find_negative_neutral_direction(pair.a, pair.b, certificate_config, problem.tol);
    if (dir) out.certificate = Vector<Scalar>(deflated.q * *dir);
    out.detail = "objective is unbounded below on the feasible set";
    return out;
  }
  if (interval.kind == IntervalKind::Point)
    return solve_degenerate(problem, deflated, pair, interval, FallbackReason::PointInterval);

  ReducedPencil<Scalar> pencil;
  try {
    pencil = reduce_pencil(pair, interval, problem.tol);
  } catch (const SingularError&) {
    return solve_degenerate(problem, deflated, pair, interval, FallbackReason::SingularMidpoint);
  }

  SolveOutcome<Scalar> out;
  out.diagnostics.interval = interval;
  out.diagnostics.kappa = pencil.kappa;
  out.diagnostics.null_dim = deflated.null_basis.cols();
  out.diagnostics.dim_n_plus = static_cast<Index>(pencil.n_plus.size());
  out.diagnostics.dim_n_minus = static_cast<Index>(pencil.n_minus.size());
  out.diagnostics.dim_d_plus = static_cast<Index>(pencil.d_plus.size());
  out.diagnostics.dim_d_minus = static_cast<Index>(pencil.d_minus.size());
  out.diagnostics.dim_n_g = static_cast<Index>(pencil.zero.size());
  out.diagnostics.reduced = true;

  const ReducedRhs<Scalar> rhs = reduced_rhs(problem, deflated, pencil);
  const SecularOutcome<Scalar> secular = secular_solve(pencil, rhs, problem.tol);
  if (secular.status != SecularStatus::Found) {
    out.status = SolveStatus::InfimumNotAttained;
    out.detail = "the boundary family requires an extreme eigenspace that is trivial";
    return out;
  }
  SolutionSet<Scalar> sol = assemble_solution(problem, deflated, pencil, rhs, secular.theta);
  const VerificationReport<Scalar> rep = verify_solution(problem, sol.representative(), sol.lambda);
  out.verification = rep;
  if (!rep.passed()) {
    out.status = SolveStatus::Degenerate;
    out.detail = "assembled candidate failed verification";
    return out;
  }
  out.status = SolveStatus::Solved;
  out.solution = std::move(sol);
  return out;
}

// ---------------------------------------------------------------------------
// Existence for all data.

/// Report of the global solvability test: a minimizer exists for every data
/// pair (w0, z0) iff after deflation the PSD set has interior, the midpoint
/// pencil is positive definite, and both extreme eigenspaces are nontrivial.
template <typename Scalar>
struct ExistenceReport {
  bool for_all_data = false;
  IntervalKind interval_kind = IntervalKind::Empty;
  bool m_positive_definite = false;
  Index dim_n_plus = 0;
  Index dim_n_minus = 0;
  std::string note;
};

template <typename Scalar>
ExistenceReport<Scalar> existence_for_all_data(const Problem<Scalar>& problem) {
  problem.validate();
  const DeflatedProblem<Scalar> deflated = deflate(problem);
  const GramPair<Scalar> pair =
      GramPair<Scalar>::FromOperators(deflated.t_r, problem.jk, deflated.v_r, problem.je, problem.tol);
  ExistenceReport<Scalar> rep;
  const PsdInterval<Scalar> interval = psd_interval(pair, problem.tol);
  rep.interval_kind = interval.kind;
  if (interval.kind != IntervalKind::Interval) {
    rep.note = "the admissible shift set has no interior";
    return rep;
  }
  try {
    const ReducedPencil<Scalar> pencil = reduce_pencil(pair, interval, problem.tol);
    rep.m_positive_definite = true;
    rep.dim_n_plus = static_cast<Index>(pencil.n_plus.size());
    rep.dim_n_minus = static_cast<Index>(pencil.n_minus.size());
  } catch (const SingularError&) {
    rep.note = "the midpoint pencil is singular";
    return rep;
  } catch (const InvalidProblemError&) {
    rep.note = "the reduced spectrum does not attain its extreme bounds";
    return rep;
  }
  rep.for_all_data = rep.dim_n_plus >= 1 && rep.dim_n_minus >= 1;
  rep.note = rep.for_all_data
                 ? "solvable for every data pair; generically the solution set is an affine "
                   "manifold parallel to the common nullspace of the two operators"
                 : "an extreme eigenspace is trivial";
  return rep;
}

}  // namespace qp1qec
