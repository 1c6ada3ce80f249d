#include "qlens/error.hpp"

namespace qlens {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::structural: return "structural";
    case ErrorKind::unsupported_format: return "unsupported_format";
    case ErrorKind::parse: return "parse";
    case ErrorKind::locked: return "locked";
    case ErrorKind::io: return "io";
    case ErrorKind::protocol: return "protocol";
  }
  return "unknown";
}

}  // namespace qlens
