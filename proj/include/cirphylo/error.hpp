#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cirphylo {

// Invalid caller input: bad parameters, out-of-domain arguments, malformed files.
class Validation_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of an operation (t <= 0, eta above threshold, ...).
class Domain_error : public Validation_error {
 public:
  using Validation_error::Validation_error;
};

// Malformed textual input.  `offset` is the byte offset where parsing stopped.
class Parse_error : public Validation_error {
 public:
  Parse_error(const std::string& what, std::size_t offset)
      : Validation_error{what + " (at byte offset " + std::to_string(offset) + ")"}, offset_{offset} {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// A computation that should have worked did not (defective eigensystem, non-finite result).
class Numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cirphylo
