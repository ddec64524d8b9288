#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace agency {

// Broad failure categories. The CLI maps each one to an exit status.
enum class ErrorKind { Usage, Backend, Validation, Inconclusive };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::Validation, what) {}
};

class BackendError : public Error {
 public:
  explicit BackendError(const std::string& what) : Error(ErrorKind::Backend, what) {}
};

// Retryable: connection refused, timeout, HTTP 429 / 5xx.
class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

// One Solve call failed for good (retries exhausted or unusable response).
class RealizationFailure : public BackendError {
 public:
  RealizationFailure(std::size_t index, const std::string& reason)
      : BackendError("realization " + std::to_string(index) + " failed: " + reason),
        index_(index),
        reason_(reason) {}
  std::size_t index() const noexcept { return index_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t index_;
  std::string reason_;
};

class InconclusiveError : public Error {
 public:
  explicit InconclusiveError(const std::string& what) : Error(ErrorKind::Inconclusive, what) {}
};

// Wraps a failure from one pipeline stage; keeps the original category.
class StageError : public Error {
 public:
  StageError(std::string stage, ErrorKind kind, const std::string& what)
      : Error(kind, stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace agency
