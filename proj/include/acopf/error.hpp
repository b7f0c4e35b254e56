#pragma once

#include <stdexcept>
#include <string>

namespace acopf {

enum class ErrorKind {
  MissingTable,
  MalformedRow,
  ZeroImpedance,
  DanglingReference,
  UnsupportedCost,
  SingularElimination,
  EmptyBox,
  SingularSchur,
  CallbackNonFinite,
  InfeasibleLinear,
  InvalidArgument,
};

const char* to_string(ErrorKind kind);

// Input and structural errors. Solver outcomes such as iteration limits are
// reported through status enums instead.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace acopf
