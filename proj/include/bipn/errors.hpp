#pragma once

#include <stdexcept>
#include <string>

namespace bipn {

// Operand lengths or matrix shapes do not line up.
class dimension_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A seed does not match the layout its consumer expects.
class seed_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An exhaustive computation would exceed its configured budget.
class budget_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Structurally invalid input (bad permutation, non-read-once formula, ...).
class validation_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed text in one of the serialized formats.
class parse_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bipn
