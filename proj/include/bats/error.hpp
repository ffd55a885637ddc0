#pragma once

#include <stdexcept>
#include <string>

namespace bats {

enum class ErrorCode {
  contract_violation = 1,
  insufficient_data,
  singular_system,
  division_by_zero,
  overflow,
  invalid_config,
  io,
  unsupported,
};

const char* to_string(ErrorCode code) noexcept;

// All library failures surface as this exception; the C API maps `code()`
// onto its status enum.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace bats
