#pragma once

#include <stdexcept>
#include <string>

namespace qpaths {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A q-exponential identity hit a zero denominator.
class SingularityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Sampler could not produce an estimate (e.g. every weight collapsed to zero).
class SamplerFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t row)
      : std::runtime_error(what + " (row " + std::to_string(row) + ")"), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

}  // namespace qpaths
