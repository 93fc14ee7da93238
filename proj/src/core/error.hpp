#pragma once

#include <stdexcept>
#include <string>

namespace rhombot {

// Mirrors rb_status in the public C header; keep the numeric values in sync.
enum class ErrorCode {
  Usage = 1,
  Parse = 2,
  Validation = 3,
  Geometry = 4,
  Infeasible = 5,
  Collision = 6,
  Connectivity = 7,
  Occupied = 8,
  Misaligned = 9,
  Pending = 10,
  Conflict = 11,
  Io = 12,
  Internal = 13,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rhombot
