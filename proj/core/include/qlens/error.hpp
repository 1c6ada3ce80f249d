#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qlens {

enum class ErrorKind {
  validation,          // a value violates a documented invariant
  structural,          // inputs are internally inconsistent (sizes, missing volume)
  unsupported_format,  // unknown encoding / version tag
  parse,               // malformed text input; message carries line or field
  locked,              // mutation attempted on a locked lens
  io,                  // file could not be opened, read or written
  protocol,            // malformed or refused wire message
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace qlens
