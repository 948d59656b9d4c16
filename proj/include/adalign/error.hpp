#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace adalign {

enum class ErrorKind {
  BadMagic,
  TruncatedFile,
  DimensionMismatch,
  NonFiniteValue,
  IoError,
  ZeroRow,
  ShapeMismatch,
  EmptyPairing,
  MissingCrossCovariance,
  ZeroVarianceDimension,
  SingularMap,
  NotPositiveDefinite,
  DegenerateDirection,
  EmptyRelevantSet,
  InvalidDistribution,
  InvalidArgument,
};

inline constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::ZeroRow: return "ZeroRow";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptyPairing: return "EmptyPairing";
    case ErrorKind::MissingCrossCovariance: return "MissingCrossCovariance";
    case ErrorKind::ZeroVarianceDimension: return "ZeroVarianceDimension";
    case ErrorKind::SingularMap: return "SingularMap";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::DegenerateDirection: return "DegenerateDirection";
    case ErrorKind::EmptyRelevantSet: return "EmptyRelevantSet";
    case ErrorKind::InvalidDistribution: return "InvalidDistribution";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

// Numerical failures map to a distinct CLI exit code.
inline constexpr bool is_numerical(ErrorKind kind) {
  return kind == ErrorKind::SingularMap || kind == ErrorKind::NotPositiveDefinite;
}

/// Every failure raised by the library. `module()` names the originating
/// subsystem; the message carries the offending byte offset or row index.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string_view module, const std::string& detail)
      : std::runtime_error(std::string(module) + ": " + std::string(to_string(kind)) + ": " + detail),
        kind_(kind),
        module_(module) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

}  // namespace adalign
