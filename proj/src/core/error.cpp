#include "core/error.hpp"

namespace rhombot {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Usage: return "usage";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::Geometry: return "geometry";
    case ErrorCode::Infeasible: return "infeasible";
    case ErrorCode::Collision: return "collision";
    case ErrorCode::Connectivity: return "connectivity";
    case ErrorCode::Occupied: return "occupied";
    case ErrorCode::Misaligned: return "misaligned";
    case ErrorCode::Pending: return "pending";
    case ErrorCode::Conflict: return "conflict";
    case ErrorCode::Io: return "io";
    case ErrorCode::Internal: return "internal";
  }
  return "internal";
}

}  // namespace rhombot
