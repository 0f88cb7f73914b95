#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace claimforge {

enum class ErrorKind { kParse, kTransport, kProtocol, kConfig, kInput, kStage };

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// A backend reply or model output that does not match its expected shape.
// `subject` names the missing key / bad field when there is one.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& message, std::string subject = {})
      : Error(ErrorKind::kParse, message), subject_(std::move(subject)) {}
  const std::string& subject() const { return subject_; }

 private:
  std::string subject_;
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& message)
      : Error(ErrorKind::kTransport, message) {}
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& message)
      : Error(ErrorKind::kProtocol, message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error(ErrorKind::kConfig, message) {}
};

// Bad input data. `line` is 1-based, 0 when not tied to a line.
class InputError : public Error {
 public:
  InputError(const std::string& message, std::size_t line = 0)
      : Error(ErrorKind::kInput,
              line ? "line " + std::to_string(line) + ": " + message : message),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Failure inside a named pipeline stage; wraps the original kind.
class StageError : public Error {
 public:
  StageError(std::string stage, ErrorKind cause, const std::string& message)
      : Error(ErrorKind::kStage, stage + ": " + message),
        stage_(std::move(stage)),
        cause_(cause) {}
  const std::string& stage() const { return stage_; }
  ErrorKind cause() const { return cause_; }

 private:
  std::string stage_;
  ErrorKind cause_;
};

}  // namespace claimforge
