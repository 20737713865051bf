#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "qp1qec/linalg.hpp"
#include "qp1qec/pencil.hpp"
#include "qp1qec/problem.hpp"

// Brute-force cross-checks for the solver. Everything here works by direct
// sampling of the constraint cone and scalar minimization along rays; nothing
// depends on the pencil reduction, so agreement between the two routes is
// meaningful evidence.
namespace qp1qec::oracle {

/// Relative band within which a sampled direction counts as neutral.
inline constexpr double kNeutralBandRel = 1e-12;

struct SampleConfig {
  std::uint64_t seed = 0;
  Index count = 10000;
  int refine_iters = 32;
  double t_grid_max = 32768.0;  ///< largest ray scale probed by the log grid
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Deterministic per-index random stream: the draw sequence for index i is a
/// pure function of (seed, i), independent of evaluation order.
class Rng {
public:
  Rng(std::uint64_t seed, std::uint64_t index) : state_(seed ^ (0xA0761D6478BD642Full * (index + 1))) {
    // burn one output so near-identical seeds decorrelate
    splitmix64(state_);
  }

  double uniform() {  // (0, 1]
    return static_cast<double>((splitmix64(state_) >> 11) + 1) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace detail

/// Draws vectors on the neutral cone {y : y'By = 0} of an indefinite symmetric
/// B. A normal draw in the eigenbasis is split by eigenvalue sign and the
/// negative block rescaled so the two quadratic halves cancel exactly.
template <typename Scalar>
class ConeSampler {
public:
  ConeSampler(const Matrix<Scalar>& b, const ToleranceConfig<Scalar>& tol = {})
      : eig_(sym_eig(b)) {
    if (!detail_indefinite(tol))
      throw SemidefiniteError("neutral cone sampling requires an indefinite form");
  }

  Index dim() const { return eig_.eigenvalues.size(); }
  const SpectralDecomposition<Scalar>& eig() const { return eig_; }

  /// Rescales the negative-eigenvalue block of eigen-coordinates z so the
  /// form vanishes; returns false when one of the halves is numerically zero.
  bool reproject(Vector<Scalar>& z) const {
    Scalar p = Scalar(0), q = Scalar(0);
    for (Index j = 0; j < dim(); ++j) {
      const Scalar contrib = eig_.eigenvalues(j) * z(j) * z(j);
      (contrib >= Scalar(0) ? p : q) += std::abs(contrib);
    }
    if (!(p > Scalar(0)) || !(q > Scalar(0))) return false;
    const Scalar s = std::sqrt(p / q);
    for (Index j = 0; j < dim(); ++j)
      if (eig_.eigenvalues(j) < Scalar(0)) z(j) *= s;
    return true;
  }

  /// Eigen-coordinates of cone sample i for the given seed.
  Vector<Scalar> sample_coords(std::uint64_t seed, Index i) const {
    detail::Rng rng(seed, static_cast<std::uint64_t>(i));
    Vector<Scalar> z(dim());
    for (int attempt = 0; attempt < 64; ++attempt) {
      for (Index j = 0; j < dim(); ++j) z(j) = Scalar(rng.normal());
      if (reproject(z)) return z;
    }
    throw SemidefiniteError("cone sampling failed to find a two-sided draw");
  }

  Vector<Scalar> sample(std::uint64_t seed, Index i) const {
    return eig_.eigenvectors * sample_coords(seed, i);
  }

private:
  bool detail_indefinite(const ToleranceConfig<Scalar>& tol) const {
    const Index n = dim();
    if (n == 0) return false;
    const Scalar hi = eig_.eigenvalues(0), lo = eig_.eigenvalues(n - 1);
    const Scalar band = tol.psd_tol * std::max(std::abs(hi), std::abs(lo));
    return hi > band && lo < -band;
  }

  SpectralDecomposition<Scalar> eig_;
};

/// Materialized cone samples, one per column.
template <typename Scalar>
Matrix<Scalar> sample_neutral_cone(const Matrix<Scalar>& b, const SampleConfig& config,
                                   const ToleranceConfig<Scalar>& tol = {}) {
  ConeSampler<Scalar> sampler(b, tol);
  Matrix<Scalar> out(b.rows(), config.count);
  for (Index i = 0; i < config.count; ++i) out.col(i) = sampler.sample(config.seed, i);
  return out;
}

template <typename Scalar>
struct BruteResult {
  Scalar value;
  Vector<Scalar> point;
};

namespace detail {

/// Exact minimum of the restriction f(x0 + t y) = f0 + b t + a t^2 over the
/// probe grid plus, when the ray is convex, the interior vertex.
template <typename Scalar>
std::pair<Scalar, Scalar> ray_minimum(Scalar f0, Scalar a, Scalar b, double t_grid_max) {
  Scalar best_v = f0;
  Scalar best_t = Scalar(0);
  Scalar t = Scalar(t_grid_max);
  for (int k = 0; k < 16; ++k, t /= Scalar(2)) {
    const Scalar v = f0 + t * (b + t * a);
    if (v < best_v) {
      best_v = v;
      best_t = t;
    }
  }
  if (a > Scalar(0)) {
    // The vertex honors the probe cap: beyond it the tiny curvature that
    // places it there is below roundoff and the closed form is meaningless.
    const Scalar tv =
        std::clamp(-b / (Scalar(2) * a), -Scalar(t_grid_max), Scalar(t_grid_max));
    const Scalar v = f0 + tv * (b + tv * a);
    if (v < best_v) {
      best_v = v;
      best_t = tv;
    }
  }
  return {best_v, best_t};
}

}  // namespace detail

/// Direct minimization of the objective over the feasible set by cone
/// sampling: every sample direction is minimized exactly along its ray, the
/// running-best candidates are polished by a deterministic pattern search in
/// cone coordinates, and the smallest value wins. The result is an upper
/// bound on the true minimum that tightens monotonically with count.
template <typename Scalar>
BruteResult<Scalar> brute_min(const Problem<Scalar>& problem, const SampleConfig& config) {
  problem.validate();
  const GramPair<Scalar> pair = problem.grams();
  if (!pair.b_indefinite)
    throw SemidefiniteError("constraint Gram matrix must be indefinite");

  const Vector<Scalar> x0 = base_point<Scalar>(problem.v, problem.z0, problem.tol);
  const Scalar f0 = problem.objective(x0);
  const Vector<Scalar> g = pair.a * x0 - indefinite_adjoint(problem.t, problem.jk) * problem.w0;

  ConeSampler<Scalar> sampler(pair.b, problem.tol);
  const Matrix<Scalar>& q = sampler.eig().eigenvectors;
  const Matrix<Scalar> a_tilde = q.transpose() * pair.a * q;  // A in cone coordinates
  const Vector<Scalar> g_tilde = q.transpose() * g;

  // Value of the best point on the ray through eigen-coordinates z.
  const auto ray_value = [&](const Vector<Scalar>& z) -> std::pair<Scalar, Scalar> {
    Vector<Scalar> zu = z / z.norm();
    const Scalar a = zu.dot(a_tilde * zu);
    const Scalar b = Scalar(2) * zu.dot(g_tilde);
    return detail::ray_minimum(f0, a, b, config.t_grid_max);
  };

  struct Candidate {
    Vector<Scalar> z;
    Scalar value;
    Scalar t;
  };

  // Streaming argmin in index order; remember every prefix champion so a
  // doubled budget refines a superset of the candidates refined before.
  std::vector<Candidate> champions;
  Scalar running = std::numeric_limits<Scalar>::infinity();
  for (Index i = 0; i < config.count; ++i) {
    Vector<Scalar> z = sampler.sample_coords(config.seed, i);
    auto [v, t] = ray_value(z);
    if (v < running) {
      running = v;
      champions.push_back({z / z.norm(), v, t});
    }
  }
  if (champions.empty()) {
    // count == 0: fall back to the base point itself.
    return {f0, x0};
  }

  // Deterministic coordinate pattern search around each champion.
  Candidate best = champions.back();
  for (auto& cand : champions) {
    Vector<Scalar> z = cand.z;
    Scalar value = cand.value;
    Scalar t = cand.t;
    Scalar step = Scalar(0.25);
    for (int iter = 0; iter < config.refine_iters; ++iter) {
      bool improved = false;
      for (Index j = 0; j < z.size(); ++j) {
        for (const Scalar sgn : {Scalar(1), Scalar(-1)}) {
          Vector<Scalar> zp = z;
          zp(j) += sgn * step;
          if (!sampler.reproject(zp)) continue;
          const Scalar nz = zp.norm();
          if (!(nz > Scalar(0))) continue;
          zp /= nz;
          auto [v, tv] = ray_value(zp);
          if (v < value) {
            value = v;
            z = zp;
            t = tv;
            improved = true;
          }
        }
      }
      if (!improved) step /= Scalar(2);
    }
    if (value < best.value) best = {z, value, t};
  }

  Vector<Scalar> y = q * best.z;
  y /= y.norm();
  return {best.value, x0 + best.t * y};
}

/// Searches the neutral cone of B for a direction where the objective Gram
/// form is negative beyond the scaled band; such a direction certifies that
/// the objective is unbounded below on the feasible set.
template <typename Scalar>
std::optional<Vector<Scalar>> find_negative_neutral_direction(const Matrix<Scalar>& a,
                                                              const Matrix<Scalar>& b,
                                                              const SampleConfig& config,
                                                              const ToleranceConfig<Scalar>& tol = {}) {
  ConeSampler<Scalar> sampler(b, tol);
  const Matrix<Scalar>& q = sampler.eig().eigenvectors;
  const Matrix<Scalar> a_tilde = q.transpose() * a * q;
  const Scalar sc = Scalar(1) + a.norm() + b.norm();
  const Scalar bar = -tol.psd_tol * sc;

  const auto form = [&](const Vector<Scalar>& z) -> Scalar {
    return z.dot(a_tilde * z) / z.squaredNorm();
  };

  Vector<Scalar> best_z;
  Scalar best = std::numeric_limits<Scalar>::infinity();
  for (Index i = 0; i < config.count; ++i) {
    Vector<Scalar> z = sampler.sample_coords(config.seed, i);
    const Scalar v = form(z);
    if (v < best) {
      best = v;
      best_z = z;
    }
    if (v < bar) return Vector<Scalar>(q * z / z.norm());
  }
  if (best_z.size() == 0) return std::nullopt;

  // Pattern-search polish of the most negative direction seen.
  Vector<Scalar> z = best_z / best_z.norm();
  Scalar step = Scalar(0.25);
  for (int iter = 0; iter < config.refine_iters; ++iter) {
    bool improved = false;
    for (Index j = 0; j < z.size(); ++j) {
      for (const Scalar sgn : {Scalar(1), Scalar(-1)}) {
        Vector<Scalar> zp = z;
        zp(j) += sgn * step;
        if (!sampler.reproject(zp)) continue;
        const Scalar v = form(zp);
        if (v < best) {
          best = v;
          z = zp / zp.norm();
          improved = true;
        }
      }
    }
    if (!improved) step /= Scalar(2);
  }
  if (best < bar) return Vector<Scalar>(q * z / z.norm());
  return std::nullopt;
}

template <typename Scalar>
struct SweepEntry {
  Scalar lambda;
  Scalar normal_residual;    ///< || (A + lambda B) x - rhs || / scale
  Scalar constraint_value;   ///< constraint form at the swept point
};

/// Solves the shifted normal equation on a uniform grid across the PSD
/// interval and reports feasibility of each stationary candidate. Useful for
/// localizing the optimal shift independently of the reduction.
template <typename Scalar>
std::vector<SweepEntry<Scalar>> lambda_sweep(const Problem<Scalar>& problem, Index grid_size) {
  problem.validate();
  if (grid_size < 1) throw InvalidProblemError("grid_size must be at least 1");
  const GramPair<Scalar> pair = problem.grams();
  const auto interval = psd_interval(pair, problem.tol);
  std::vector<SweepEntry<Scalar>> out;
  if (interval.kind == IntervalKind::Empty) return out;

  const Vector<Scalar> tw = indefinite_adjoint(problem.t, problem.jk) * problem.w0;
  const Vector<Scalar> vz = indefinite_adjoint(problem.v, problem.je) * problem.z0;
  const Scalar sc = problem_scale(problem, pair);
  const Index points = interval.kind == IntervalKind::Point ? 1 : grid_size;
  for (Index k = 0; k < points; ++k) {
    const Scalar frac = points == 1 ? Scalar(0.5) : Scalar(k) / Scalar(points - 1);
    const Scalar lam = interval.rho_minus + (interval.rho_plus - interval.rho_minus) * frac;
    const Matrix<Scalar> s = pair.a + lam * pair.b;
    const Vector<Scalar> rhs = tw + lam * vz;
    const Vector<Scalar> x = moore_penrose<Scalar>(s, problem.tol.rank_tol) * rhs;
    out.push_back({lam, (s * x - rhs).norm() / sc, problem.constraint(x)});
  }
  return out;
}

}  // namespace qp1qec::oracle
