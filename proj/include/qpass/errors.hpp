#pragma once

#include <stdexcept>
#include <string>

namespace qpass {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed catalog, config, or checkpoint metadata.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A pass-level action was appended with the μ budget already spent.
class BudgetExhausted : public Error {
 public:
  using Error::Error;
};

/// Action not legal in the current state; always a caller bug.
class IllegalAction : public Error {
 public:
  using Error::Error;
};

/// Backend subprocess failed or exited non-zero.
class EnvironmentFault : public Error {
 public:
  EnvironmentFault(const std::string& what, std::string stderr_text = {})
      : Error(what), stderr_(std::move(stderr_text)) {}
  const std::string& stderr_text() const { return stderr_; }

 private:
  std::string stderr_;
};

class TimeoutFault : public EnvironmentFault {
 public:
  using EnvironmentFault::EnvironmentFault;
};

class MeasurementFault : public EnvironmentFault {
 public:
  MeasurementFault(const std::string& what, int run_index, std::string stderr_text = {})
      : EnvironmentFault(what, std::move(stderr_text)), run_index_(run_index) {}
  int run_index() const { return run_index_; }

 private:
  int run_index_;
};

/// Stored artifact no longer hashes to its id, or a record references a missing artifact.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace qpass
