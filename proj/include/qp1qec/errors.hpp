#pragma once

#include <stdexcept>
#include <string>

namespace qp1qec {

/// Operand shapes do not line up (matrix/vector sizes, signature dimensions).
class DimensionError : public std::invalid_argument {
public:
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

/// A matrix required to be positive semidefinite has an eigenvalue below the
/// tolerance band.
class NotPsdError : public std::runtime_error {
public:
  explicit NotPsdError(const std::string& what) : std::runtime_error(what) {}
};

/// A matrix required to be invertible (or positive definite) is numerically
/// singular at the configured rank tolerance.
class SingularError : public std::runtime_error {
public:
  explicit SingularError(const std::string& what) : std::runtime_error(what) {}
};

/// The constraint Gram matrix is semidefinite; the solver requires eigenvalues
/// of both signs.
class SemidefiniteError : public std::runtime_error {
public:
  explicit SemidefiniteError(const std::string& what) : std::runtime_error(what) {}
};

/// A matrix required to have full row rank is rank deficient.
class RankDeficientError : public std::runtime_error {
public:
  explicit RankDeficientError(const std::string& what) : std::runtime_error(what) {}
};

/// Problem data violates a structural precondition (e.g. the constraint map is
/// not surjective, or a tolerance is non-positive).
class InvalidProblemError : public std::invalid_argument {
public:
  explicit InvalidProblemError(const std::string& what) : std::invalid_argument(what) {}
};

/// An input document cannot be parsed, lacks a required field, or holds a
/// field of the wrong type.
class FileFormatError : public std::runtime_error {
public:
  explicit FileFormatError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qp1qec
