#ifndef SPEM_ERROR_HPP
#define SPEM_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spem {

/// Coarse classification used by the CLI to pick exit codes and error records.
enum class ErrorKind {
  Schema,     // malformed or missing input columns, unreadable files
  Numerical,  // non-PD matrices, rank deficiency, failed likelihoods
  Config,     // invalid parameter combinations
  Domain,     // precondition violations on arguments
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by the Cholesky factorizations when a pivot is not strictly positive.
class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(std::size_t pivot, double value)
      : Error(ErrorKind::Numerical, "matrix is not positive definite at pivot " + std::to_string(pivot) +
                                        " (pivot value " + std::to_string(value) + ")"),
        pivot_(pivot),
        value_(value) {}
  [[nodiscard]] std::size_t pivot() const noexcept { return pivot_; }
  [[nodiscard]] double value() const noexcept { return value_; }

 private:
  std::size_t pivot_;
  double value_;
};

class RankDeficient : public Error {
 public:
  explicit RankDeficient(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

inline const char* kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Numerical: return "numerical";
    case ErrorKind::Config: return "config";
    case ErrorKind::Domain: return "domain";
  }
  return "unknown";
}

}  // namespace spem

#endif  // SPEM_ERROR_HPP
