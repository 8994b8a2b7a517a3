#pragma once

#include <stdexcept>
#include <string>

namespace inpaint {

// Root of every error raised by the library. Subclasses name the failure
// category so callers (CLI, service) can map them to exit codes / HTTP status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ResolutionError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class DegenerateMaskError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

class IngestionError : public Error {
 public:
  using Error::Error;
};

class PreprocessError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

class BalancingError : public Error {
 public:
  using Error::Error;
};

// Raised when a training step produces a non-finite loss. Carries the path of
// the most recent checkpoint that was written before the failure (may be empty).
class TrainingAborted : public Error {
 public:
  TrainingAborted(const std::string& what, std::string last_checkpoint)
      : Error(what), last_checkpoint_(std::move(last_checkpoint)) {}
  const std::string& last_checkpoint() const noexcept { return last_checkpoint_; }

 private:
  std::string last_checkpoint_;
};

}  // namespace inpaint
