#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cadenza {

enum class ErrorKind {
  Io,
  BadMagic,
  VersionMismatch,
  Truncated,
  Overflow,
  BadHeader,
  Validation,
  Pairing,
  SplitConsistency,
  Config,
  Unsatisfiable,
  Shape,
  NonFinite,
  Divergence,
};

std::string_view to_string(ErrorKind kind);

// Every failure surfaced by the library carries a kind so callers (and the
// CLI exit code) can distinguish format damage from bad input.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "io error";
    case ErrorKind::BadMagic: return "bad magic";
    case ErrorKind::VersionMismatch: return "version mismatch";
    case ErrorKind::Truncated: return "truncated";
    case ErrorKind::Overflow: return "overflow";
    case ErrorKind::BadHeader: return "bad header";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Pairing: return "pairing error";
    case ErrorKind::SplitConsistency: return "split consistency";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Unsatisfiable: return "unsatisfiable";
    case ErrorKind::Shape: return "shape mismatch";
    case ErrorKind::NonFinite: return "non-finite value";
    case ErrorKind::Divergence: return "divergence";
  }
  return "unknown";
}

}  // namespace cadenza
