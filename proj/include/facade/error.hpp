#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace facade {

enum class ErrorKind {
  InvalidBox,
  InvalidParam,
  Parse,
  Ordering,
  EmptyLog,
  Sync,
  Validation,
  UnknownFrame,
  UnsupportedFormat,
  Truncated,
  DimensionMismatch,
  NoSeed,
  BandTooSmall,
  InvalidPitch,
  ZeroExtent,
  Incompatible,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidBox: return "invalid_box";
    case ErrorKind::InvalidParam: return "invalid_param";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Ordering: return "ordering";
    case ErrorKind::EmptyLog: return "empty_log";
    case ErrorKind::Sync: return "sync";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::UnknownFrame: return "unknown_frame";
    case ErrorKind::UnsupportedFormat: return "unsupported_format";
    case ErrorKind::Truncated: return "truncated";
    case ErrorKind::DimensionMismatch: return "dimension_mismatch";
    case ErrorKind::NoSeed: return "no_seed";
    case ErrorKind::BandTooSmall: return "band_too_small";
    case ErrorKind::InvalidPitch: return "invalid_pitch";
    case ErrorKind::ZeroExtent: return "zero_extent";
    case ErrorKind::Incompatible: return "incompatible";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

/// Single exception type for the toolkit; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace facade
