#pragma once

#include <stdexcept>
#include <string>

namespace hqfs {

/// Failure category; the CLI maps each kind onto a process exit code.
enum class ErrorKind {
  config,  // invalid configuration or stage mismatch
  data,    // unreadable/invalid input data or artifact
  solver,  // optimizer or training failure
  audit,   // signing, key or log failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class SolverError : public Error {
 public:
  explicit SolverError(const std::string& what) : Error(ErrorKind::solver, what) {}
};

class AuditError : public Error {
 public:
  explicit AuditError(const std::string& what) : Error(ErrorKind::audit, what) {}
};

}  // namespace hqfs
