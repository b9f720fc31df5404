#pragma once

#include <stdexcept>
#include <string>

namespace bintopo {

enum class ErrorCode {
  invalid_argument,
  not_positive_definite,
  singular,
  breakdown,
  singular_core,
  infeasible_move,
  guard_violation,
  internal_consistency,
  config,
  io,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::invalid_argument, what);
}

}  // namespace bintopo
