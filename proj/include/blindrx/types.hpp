#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace blindrx {

using cplx = std::complex<double>;

// Complex baseband samples at unit (normalized) sample period.
using Signal = std::vector<cplx>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

enum class ErrorCode {
  InvalidArgument,
  NonLinearModulation,
  InvalidRolloff,
  IndexOutOfRange,
  SignalTooShort,
  ZeroPowerSignal,
  NoBandDetected,
  InvalidBandwidth,
  NoCrossing,
  Divergence,
  DivisionByZero,
  EmptyOverlap,
  LengthMismatch,
  EmptySet,
  FormatVersionMismatch,
  TruncatedFile,
  IoError,
  ConfigError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonLinearModulation: return "NonLinearModulation";
    case ErrorCode::InvalidRolloff: return "InvalidRolloff";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::SignalTooShort: return "SignalTooShort";
    case ErrorCode::ZeroPowerSignal: return "ZeroPowerSignal";
    case ErrorCode::NoBandDetected: return "NoBandDetected";
    case ErrorCode::InvalidBandwidth: return "InvalidBandwidth";
    case ErrorCode::NoCrossing: return "NoCrossing";
    case ErrorCode::Divergence: return "Divergence";
    case ErrorCode::DivisionByZero: return "DivisionByZero";
    case ErrorCode::EmptyOverlap: return "EmptyOverlap";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::FormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Library error. `stage` names the processing stage that raised it when the
/// error comes out of a multi-stage chain (empty otherwise).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::string stage = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        stage_(std::move(stage)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }

 private:
  ErrorCode code_;
  std::string stage_;
};

inline double mean_power(std::span<const cplx> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& v : x) acc += std::norm(v);
  return acc / static_cast<double>(x.size());
}

inline bool all_finite(std::span<const cplx> x) {
  for (const auto& v : x)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  return true;
}

inline void require_signal(std::span<const cplx> x, const char* who) {
  if (x.empty()) throw Error(ErrorCode::SignalTooShort, std::string(who) + ": empty signal");
  if (!all_finite(x)) throw Error(ErrorCode::InvalidArgument, std::string(who) + ": non-finite sample");
}

// Wraps a value into [0, 1).
inline double wrap_unit(double v) {
  double r = v - std::floor(v);
  return r >= 1.0 ? 0.0 : r;
}

}  // namespace blindrx
