#pragma once

#include <stdexcept>
#include <string>

namespace bwr {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed mesh file text.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Connectivity that violates the mesh invariants (index range, degenerate
/// faces, non-manifold edges, missing elements).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Operation requires a closed orientable mesh.
class OpenMeshError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class GenusMismatchError : public Error {
 public:
  using Error::Error;
};

/// A direction line found no reference triangle, after every retry.
class PierceMissError : public Error {
 public:
  PierceMissError(const std::string& what, int level = -1, long long vertex = -1)
      : Error(what), level_(level), vertex_(vertex) {}
  int level() const { return level_; }
  long long vertex() const { return vertex_; }

 private:
  int level_;
  long long vertex_;
};

/// Two representations that must share connectivity do not.
class IncompatibleError : public Error {
 public:
  using Error::Error;
};

/// Bad binary container: wrong magic, version, checksum or truncated payload.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Bit budget too small to decode anything.
class BudgetError : public Error {
 public:
  using Error::Error;
};

}  // namespace bwr
