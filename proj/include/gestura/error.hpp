#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace gestura {

enum class ErrorKind {
  invalid_input,
  format,
  parse,
  freeze_violation,
  protocol,
  timeout,
  backend_unavailable,
  transport,
  port_unavailable,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid_input";
    case ErrorKind::format: return "format";
    case ErrorKind::parse: return "parse";
    case ErrorKind::freeze_violation: return "freeze_violation";
    case ErrorKind::protocol: return "protocol";
    case ErrorKind::timeout: return "timeout";
    case ErrorKind::backend_unavailable: return "backend_unavailable";
    case ErrorKind::transport: return "transport";
    case ErrorKind::port_unavailable: return "port_unavailable";
  }
  return "unknown";
}

/// Base of every error thrown by the library. `kind()` is stable and is what
/// the CLI and the wire protocol report.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& message)
      : Error(ErrorKind::invalid_input, message) {}
};

/// A file or document does not match its format. `path` names the offending
/// field (for example `frames[3].points`).
class FormatError : public Error {
 public:
  FormatError(std::string path, const std::string& message)
      : Error(ErrorKind::format, path.empty() ? message : path + ": " + message),
        path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class FreezeViolation : public Error {
 public:
  explicit FreezeViolation(const std::string& component)
      : Error(ErrorKind::freeze_violation,
              "attempt to update frozen component '" + component + "'"),
        component_(component) {}

  const std::string& component() const noexcept { return component_; }

 private:
  std::string component_;
};

/// Wire-level violation. `field` names the offending request/response field.
class ProtocolError : public Error {
 public:
  ProtocolError(std::string field, const std::string& message)
      : Error(ErrorKind::protocol, field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace gestura
