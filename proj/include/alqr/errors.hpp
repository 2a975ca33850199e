#pragma once

#include <stdexcept>
#include <string>

namespace alqr {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad dimensions, out-of-range parameters, malformed config.
struct ConfigError : Error {
  std::string field;
  std::string reason;
  ConfigError(std::string f, const std::string& msg)
      : Error(f.empty() ? msg : f + ": " + msg), field(std::move(f)), reason(msg) {}
  explicit ConfigError(const std::string& msg) : ConfigError("", msg) {}
};

struct NotStabilizableError : Error {
  using Error::Error;
};

struct NotStabilizingError : Error {
  double spectral_radius;
  NotStabilizingError(double rho, const std::string& msg)
      : Error(msg), spectral_radius(rho) {}
};

struct CertificateError : Error {
  using Error::Error;
};

struct SynthesisError : Error {
  using Error::Error;
};

struct DegenerateSolutionError : SynthesisError {
  using SynthesisError::SynthesisError;
};

struct ModelInvariantError : Error {
  using Error::Error;
};

struct ScheduleError : Error {
  using Error::Error;
};

struct ConstantsError : ScheduleError {
  using ScheduleError::ScheduleError;
};

struct DomainError : Error {
  using Error::Error;
};

struct InvalidSampleError : Error {
  using Error::Error;
};

struct BlowUpError : Error {
  long step;
  double state_norm;
  BlowUpError(long t, double norm, const std::string& msg)
      : Error(msg), step(t), state_norm(norm) {}
};

struct IncompleteTrajectoryError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace alqr
