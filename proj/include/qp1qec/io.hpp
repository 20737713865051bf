#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qp1qec/solver.hpp"
#include "qp1qec/splines.hpp"

namespace qp1qec::io {

using json = nlohmann::json;

/// Doubles are written with 17 significant digits, which round-trips every
/// finite value exactly; non-finite values become JSON null.
inline std::string format_number(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Minimal streaming JSON writer with deterministic key order and the
/// number format above.
class JsonWriter {
public:
  explicit JsonWriter(std::ostream& os) : os_(os) {}

  JsonWriter& begin_object() {
    sep();
    os_ << '{';
    fresh_.push_back(true);
    return *this;
  }
  JsonWriter& end_object() {
    os_ << '}';
    fresh_.pop_back();
    return *this;
  }
  JsonWriter& begin_array() {
    sep();
    os_ << '[';
    fresh_.push_back(true);
    return *this;
  }
  JsonWriter& end_array() {
    os_ << ']';
    fresh_.pop_back();
    return *this;
  }
  JsonWriter& key(const char* k) {
    sep();
    os_ << '"' << k << "\":";
    pending_value_ = true;
    return *this;
  }
  JsonWriter& number(double v) {
    sep();
    os_ << format_number(v);
    return *this;
  }
  JsonWriter& integer(long long v) {
    sep();
    os_ << v;
    return *this;
  }
  JsonWriter& boolean(bool b) {
    sep();
    os_ << (b ? "true" : "false");
    return *this;
  }
  JsonWriter& string(const std::string& s) {
    sep();
    os_ << '"' << s << '"';
    return *this;
  }
  JsonWriter& null() {
    sep();
    os_ << "null";
    return *this;
  }

private:
  void sep() {
    if (pending_value_) {
      pending_value_ = false;
      return;
    }
    if (!fresh_.empty()) {
      if (!fresh_.back()) os_ << ',';
      fresh_.back() = false;
    }
  }

  std::ostream& os_;
  std::vector<bool> fresh_;
  bool pending_value_ = false;
};

// ---------------------------------------------------------------------------
// Parsing.

namespace detail {

inline const json& require(const json& obj, const char* key) {
  if (!obj.is_object()) throw FileFormatError("expected an object while looking for key '" +
                                              std::string(key) + "'");
  const auto it = obj.find(key);
  if (it == obj.end()) throw FileFormatError("missing key '" + std::string(key) + "'");
  return *it;
}

inline Index require_dim(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw FileFormatError("key '" + std::string(key) + "' must be a nonnegative integer");
  return static_cast<Index>(v.get<long long>());
}

inline std::vector<double> number_array(const json& v, const char* what) {
  if (!v.is_array()) throw FileFormatError("key '" + std::string(what) + "' must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& el : v) {
    if (!el.is_number()) throw FileFormatError("key '" + std::string(what) +
                                               "' must contain only numbers");
    out.push_back(el.get<double>());
  }
  return out;
}

inline Matrix<double> matrix_from(const json& v, Index rows, Index cols, const char* what) {
  const std::vector<double> flat = number_array(v, what);
  if (static_cast<Index>(flat.size()) != rows * cols)
    throw DimensionError("key '" + std::string(what) + "' must hold " + std::to_string(rows) +
                         "*" + std::to_string(cols) + " numbers in row-major order");
  Matrix<double> m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = flat[static_cast<std::size_t>(i * cols + j)];
  return m;
}

inline Vector<double> vector_from(const json& v, Index n, const char* what) {
  const std::vector<double> flat = number_array(v, what);
  if (static_cast<Index>(flat.size()) != n)
    throw DimensionError("key '" + std::string(what) + "' must hold " + std::to_string(n) +
                         " numbers");
  Vector<double> out(n);
  for (Index i = 0; i < n; ++i) out(i) = flat[static_cast<std::size_t>(i)];
  return out;
}

/// A signature is either a length-m array of +1/-1 (diagonal form) or a
/// row-major m*m symmetric invertible weight matrix.
inline KreinSignature<double> signature_from(const json& v, Index m, const char* what) {
  const std::vector<double> flat = number_array(v, what);
  const auto is_sign = [](double x) { return x == 1.0 || x == -1.0; };
  if (static_cast<Index>(flat.size()) == m) {
    bool all_signs = true;
    for (double x : flat) all_signs = all_signs && is_sign(x);
    if (all_signs) {
      Vector<double> signs(m);
      for (Index i = 0; i < m; ++i) signs(i) = flat[static_cast<std::size_t>(i)];
      return KreinSignature<double>::FromSigns(signs);
    }
    if (m != 1)
      throw FileFormatError("key '" + std::string(what) +
                            "' in diagonal form must contain only +1 or -1");
  }
  if (static_cast<Index>(flat.size()) != m * m)
    throw DimensionError("key '" + std::string(what) + "' must have length " + std::to_string(m) +
                         " (signs) or " + std::to_string(m * m) + " (full matrix)");
  Matrix<double> mat(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j) mat(i, j) = flat[static_cast<std::size_t>(i * m + j)];
  try {
    return KreinSignature<double>(std::move(mat));
  } catch (const InvalidProblemError& e) {
    throw FileFormatError("key '" + std::string(what) + "': " + e.what());
  } catch (const SingularError& e) {
    throw FileFormatError("key '" + std::string(what) + "': " + e.what());
  }
}

}  // namespace detail

/// A parsed problem document: the stacked instance plus, when the document
/// carries one, the originating mixed formulation (sharing V, J_E, z0, and
/// the tail of w0).
struct LoadedFile {
  Problem<double> problem;
  std::optional<MixedSplinesProblem<double>> splines;
};

inline LoadedFile parse_problem_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw FileFormatError(e.what());
  }
  if (!root.is_object()) throw FileFormatError("the top level must be an object");

  const Index n = detail::require_dim(root, "n");
  const Index mk = detail::require_dim(root, "mK");
  const Index me = detail::require_dim(root, "mE");

  LoadedFile out;
  Problem<double>& p = out.problem;
  p.t = detail::matrix_from(detail::require(root, "T"), mk, n, "T");
  p.jk = detail::signature_from(detail::require(root, "JK"), mk, "JK");
  p.v = detail::matrix_from(detail::require(root, "V"), me, n, "V");
  p.je = detail::signature_from(detail::require(root, "JE"), me, "JE");
  p.w0 = detail::vector_from(detail::require(root, "w0"), mk, "w0");
  p.z0 = detail::vector_from(detail::require(root, "z0"), me, "z0");

  if (root.contains("tolerances")) {
    const json& t = root.at("tolerances");
    if (!t.is_object()) throw FileFormatError("key 'tolerances' must be an object");
    const auto opt = [&](const char* key, double& target) {
      if (!t.contains(key)) return;
      if (!t.at(key).is_number()) throw FileFormatError("tolerance '" + std::string(key) +
                                                        "' must be a number");
      target = t.at(key).get<double>();
    };
    opt("rank_tol", p.tol.rank_tol);
    opt("psd_tol", p.tol.psd_tol);
    opt("root_tol", p.tol.root_tol);
    opt("residual_tol", p.tol.residual_tol);
    if (t.contains("max_iter")) {
      if (!t.at("max_iter").is_number_integer())
        throw FileFormatError("tolerance 'max_iter' must be an integer");
      p.tol.max_iter = t.at("max_iter").get<int>();
    }
  }

  if (root.contains("splines")) {
    const json& s = root.at("splines");
    const std::vector<double> uflat = detail::number_array(detail::require(s, "U"), "U");
    const std::vector<double> wflat = detail::number_array(detail::require(s, "W"), "W");
    if (n == 0 || uflat.size() % static_cast<std::size_t>(n) != 0 ||
        wflat.size() % static_cast<std::size_t>(n) != 0)
      throw DimensionError("splines operators must have row-major length divisible by n");
    const Index m1 = static_cast<Index>(uflat.size()) / n;
    const Index m2 = static_cast<Index>(wflat.size()) / n;
    MixedSplinesProblem<double> msp;
    msp.u = detail::matrix_from(detail::require(s, "U"), m1, n, "U");
    msp.w = detail::matrix_from(detail::require(s, "W"), m2, n, "W");
    msp.j1 = detail::signature_from(detail::require(s, "J1"), m1, "J1");
    msp.j2 = detail::signature_from(detail::require(s, "J2"), m2, "J2");
    const json& mu = detail::require(s, "mu");
    if (!mu.is_number()) throw FileFormatError("key 'mu' must be a number");
    msp.mu = mu.get<double>();
    if (p.w0.size() != m1 + m2)
      throw DimensionError("a splines document requires mK = m1 + m2 with target (0, w0)");
    msp.w0 = p.w0.tail(m2);
    msp.v = p.v;
    msp.je = p.je;
    msp.z0 = p.z0;
    out.splines = std::move(msp);
  }
  return out;
}

inline LoadedFile load_problem_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileFormatError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_problem_text(ss.str());
}

// ---------------------------------------------------------------------------
// Writing.

namespace detail {

inline void write_flat(JsonWriter& w, const Matrix<double>& m) {
  w.begin_array();
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) w.number(m(i, j));
  w.end_array();
}

inline void write_vector(JsonWriter& w, const Vector<double>& v) {
  w.begin_array();
  for (Index i = 0; i < v.size(); ++i) w.number(v(i));
  w.end_array();
}

inline void write_rows(JsonWriter& w, const Matrix<double>& m) {
  w.begin_array();
  for (Index i = 0; i < m.rows(); ++i) {
    w.begin_array();
    for (Index j = 0; j < m.cols(); ++j) w.number(m(i, j));
    w.end_array();
  }
  w.end_array();
}

/// Signatures serialize to the compact sign form whenever they are exactly
/// diagonal +1/-1, and to the full row-major matrix otherwise.
inline void write_signature(JsonWriter& w, const KreinSignature<double>& sig) {
  const Matrix<double>& m = sig.matrix();
  bool diagonal_signs = true;
  for (Index i = 0; i < m.rows() && diagonal_signs; ++i)
    for (Index j = 0; j < m.cols() && diagonal_signs; ++j) {
      if (i == j)
        diagonal_signs = m(i, j) == 1.0 || m(i, j) == -1.0;
      else
        diagonal_signs = m(i, j) == 0.0;
    }
  if (diagonal_signs) {
    w.begin_array();
    for (Index i = 0; i < m.rows(); ++i) w.number(m(i, i));
    w.end_array();
  } else {
    write_flat(w, m);
  }
}

}  // namespace detail

inline void write_problem_file(std::ostream& os, const Problem<double>& p,
                               const std::optional<MixedSplinesProblem<double>>& splines = {}) {
  JsonWriter w(os);
  w.begin_object();
  w.key("n").integer(p.n());
  w.key("mK").integer(p.mk());
  w.key("mE").integer(p.me());
  w.key("T");
  detail::write_flat(w, p.t);
  w.key("JK");
  detail::write_signature(w, p.jk);
  w.key("V");
  detail::write_flat(w, p.v);
  w.key("JE");
  detail::write_signature(w, p.je);
  w.key("w0");
  detail::write_vector(w, p.w0);
  w.key("z0");
  detail::write_vector(w, p.z0);
  w.key("tolerances").begin_object();
  w.key("rank_tol").number(p.tol.rank_tol);
  w.key("psd_tol").number(p.tol.psd_tol);
  w.key("root_tol").number(p.tol.root_tol);
  w.key("residual_tol").number(p.tol.residual_tol);
  w.key("max_iter").integer(p.tol.max_iter);
  w.end_object();
  if (splines) {
    w.key("splines").begin_object();
    w.key("U");
    detail::write_flat(w, splines->u);
    w.key("J1");
    detail::write_signature(w, splines->j1);
    w.key("W");
    detail::write_flat(w, splines->w);
    w.key("J2");
    detail::write_signature(w, splines->j2);
    w.key("mu").number(splines->mu);
    w.end_object();
  }
  w.end_object();
  os << '\n';
}

// ---------------------------------------------------------------------------
// Reports.

/// Flattened report payload shared by all commands.
struct Report {
  std::string status;
  PsdInterval<double> interval;
  double kappa = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> lambda;
  std::optional<double> min_value;
  std::optional<SolutionSet<double>> solution;
  double radius = 0.0;  ///< offset of the representative from the center
  std::optional<VerificationReport<double>> residuals;
  Index dim_n_plus = 0, dim_n_minus = 0, dim_n_g = 0, dim_d_plus = 0, dim_d_minus = 0;
  bool existence_for_all_data = false;
  std::optional<Vector<double>> certificate;
  double timings_ms = 0.0;
};

inline const char* status_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Solved: return "SOLVED";
    case SolveStatus::UnboundedBelow: return "UNBOUNDED_BELOW";
    case SolveStatus::InfimumNotAttained: return "INFIMUM_NOT_ATTAINED";
    case SolveStatus::Degenerate: return "DEGENERATE";
  }
  return "DEGENERATE";
}

inline const char* interval_kind_string(IntervalKind k) {
  switch (k) {
    case IntervalKind::Empty: return "EMPTY";
    case IntervalKind::Point: return "POINT";
    case IntervalKind::Interval: return "INTERVAL";
  }
  return "EMPTY";
}

inline Report make_report(const SolveOutcome<double>& out, const ExistenceReport<double>& existence,
                          double timings_ms) {
  Report rep;
  rep.status = status_string(out.status);
  rep.interval = out.diagnostics.interval;
  rep.kappa = out.diagnostics.kappa;
  if (out.solution) {
    rep.lambda = out.solution->lambda;
    rep.min_value = out.solution->min_value;
    rep.solution = out.solution;
    rep.radius = out.solution->radius;
    if (out.solution->ellipsoid_map.cols() > 0)
      rep.radius *= out.solution->ellipsoid_map.col(0).norm();
  }
  rep.residuals = out.verification;
  rep.dim_n_plus = out.diagnostics.dim_n_plus;
  rep.dim_n_minus = out.diagnostics.dim_n_minus;
  rep.dim_n_g = out.diagnostics.dim_n_g;
  rep.dim_d_plus = out.diagnostics.dim_d_plus;
  rep.dim_d_minus = out.diagnostics.dim_d_minus;
  rep.existence_for_all_data = existence.for_all_data;
  rep.certificate = out.certificate;
  rep.timings_ms = timings_ms;
  return rep;
}

inline void write_report(std::ostream& os, const Report& rep) {
  JsonWriter w(os);
  w.begin_object();
  w.key("status").string(rep.status);
  w.key("interval").begin_object();
  w.key("kind").string(interval_kind_string(rep.interval.kind));
  w.key("rho_minus").number(rep.interval.rho_minus);
  w.key("rho_plus").number(rep.interval.rho_plus);
  w.end_object();
  w.key("kappa").number(rep.kappa);
  w.key("lambda");
  rep.lambda ? (void)w.number(*rep.lambda) : (void)w.null();
  w.key("min_value");
  rep.min_value ? (void)w.number(*rep.min_value) : (void)w.null();
  w.key("solution");
  if (rep.solution) {
    w.begin_object();
    w.key("particular");
    detail::write_vector(w, rep.solution->particular);
    w.key("ellipsoid_map");
    detail::write_rows(w, rep.solution->ellipsoid_map);
    w.key("radius").number(rep.radius);
    w.key("null_basis");
    detail::write_rows(w, rep.solution->null_part);
    w.end_object();
  } else {
    w.null();
  }
  w.key("residuals");
  if (rep.residuals) {
    w.begin_object();
    w.key("normal").number(rep.residuals->normal_residual);
    w.key("constraint").number(rep.residuals->constraint_residual);
    w.key("orthogonality").number(rep.residuals->orthogonality_residual);
    w.key("lambda_in_interval").boolean(rep.residuals->lambda_in_interval);
    w.key("pencil_psd").boolean(rep.residuals->pencil_psd);
    w.key("pencil_min_eigenvalue").number(rep.residuals->pencil_min_eigenvalue);
    w.key("tolerance").number(rep.residuals->tolerance);
    w.end_object();
  } else {
    w.null();
  }
  w.key("subspace_dims").begin_object();
  w.key("N_plus").integer(rep.dim_n_plus);
  w.key("N_minus").integer(rep.dim_n_minus);
  w.key("N_G").integer(rep.dim_n_g);
  w.key("D_plus").integer(rep.dim_d_plus);
  w.key("D_minus").integer(rep.dim_d_minus);
  w.end_object();
  w.key("existence_for_all_data").boolean(rep.existence_for_all_data);
  if (rep.certificate) {
    w.key("certificate");
    detail::write_vector(w, *rep.certificate);
  }
  w.key("timings_ms").number(rep.timings_ms);
  w.end_object();
  os << '\n';
}

}  // namespace qp1qec::io
