#pragma once

#include <stdexcept>
#include <string>

namespace ldis {

enum class ErrorCode {
  invalid_argument = 1,
  io = 2,
  format = 3,
  dimension_mismatch = 4,
  non_finite = 5,
  degenerate = 6,
};

// Every failure raised by the library carries one of the codes above so the C
// layer can translate it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ldis
