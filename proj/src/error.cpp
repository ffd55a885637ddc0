#include "bats/error.hpp"

namespace bats {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::contract_violation: return "contract violation";
    case ErrorCode::insufficient_data: return "insufficient data";
    case ErrorCode::singular_system: return "singular system";
    case ErrorCode::division_by_zero: return "division by zero";
    case ErrorCode::overflow: return "overflow";
    case ErrorCode::invalid_config: return "invalid configuration";
    case ErrorCode::io: return "i/o error";
    case ErrorCode::unsupported: return "unsupported operation";
  }
  return "unknown error";
}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace bats
