#pragma once

#include <stdexcept>
#include <string>

namespace forge {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class TokenizationError : public Error {
 public:
  using Error::Error;
};

class AdapterError : public Error {
 public:
  using Error::Error;
};

// Raised when a capability (gradients, logits) is requested from an adapter
// that cannot provide it. Never degrades silently.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what, int attempts = 1)
      : Error(what), attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

class EmptyResponseError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class OptimizationError : public Error {
 public:
  using Error::Error;
};

class QuantizationError : public Error {
 public:
  using Error::Error;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

class RewriteError : public Error {
 public:
  using Error::Error;
};

class JudgeParseError : public Error {
 public:
  using Error::Error;
};

class JudgeAvailabilityError : public Error {
 public:
  explicit JudgeAvailabilityError(const std::string& what,
                                  std::string partial_checkpoint = "")
      : Error(what), partial_checkpoint_(std::move(partial_checkpoint)) {}
  // Path of the partial checkpoint persisted before the abort; empty if none.
  const std::string& partial_checkpoint() const { return partial_checkpoint_; }

 private:
  std::string partial_checkpoint_;
};

class IngestError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

// Carries the path of the offending field, e.g. "budget.epsilon".
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field_path, const std::string& message)
      : Error(field_path + ": " + message), field_path_(field_path) {}
  const std::string& field_path() const { return field_path_; }

 private:
  std::string field_path_;
};

// File and serialization failures that are not dataset ingestion.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace forge
