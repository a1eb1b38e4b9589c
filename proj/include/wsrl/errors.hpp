#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace wsrl {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// tensor-autodiff
class ShapeError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  IndexError(const std::string& what, int64_t index) : Error(what), index_(index) {}
  int64_t index() const { return index_; }

 private:
  int64_t index_;
};

class AutodiffError : public Error {
 public:
  using Error::Error;
};

class NonScalarLossError : public AutodiffError {
 public:
  using AutodiffError::AutodiffError;
};

class DetachedLossError : public AutodiffError {
 public:
  using AutodiffError::AutodiffError;
};

class MissingGradError : public AutodiffError {
 public:
  using AutodiffError::AutodiffError;
};

// workspace
class WorkspaceError : public Error {
 public:
  using Error::Error;
};

class UnknownVariableError : public WorkspaceError {
 public:
  using WorkspaceError::WorkspaceError;
};

class UnwrittenTimestepError : public WorkspaceError {
 public:
  UnwrittenTimestepError(const std::string& what, int64_t t) : WorkspaceError(what), t_(t) {}
  int64_t timestep() const { return t_; }

 private:
  int64_t t_;
};

class BatchMismatchError : public WorkspaceError {
 public:
  using WorkspaceError::WorkspaceError;
};

class ItemShapeMismatchError : public WorkspaceError {
 public:
  using WorkspaceError::WorkspaceError;
};

class RangeError : public WorkspaceError {
 public:
  using WorkspaceError::WorkspaceError;
};

// serialization
class FormatError : public Error {
 public:
  using Error::Error;
};

class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};

class VersionMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};

// agents
class AgentError : public Error {
 public:
  using Error::Error;
};

class ReentrancyError : public AgentError {
 public:
  using AgentError::AgentError;
};

class KwArgError : public AgentError {
 public:
  using AgentError::AgentError;
};

// environments
class EnvError : public Error {
 public:
  using Error::Error;
};

class ActionSpaceError : public EnvError {
 public:
  using EnvError::EnvError;
};

// parallel execution
class RemoteError : public Error {
 public:
  using Error::Error;
};

class AlreadyRunningError : public RemoteError {
 public:
  using RemoteError::RemoteError;
};

class WorkerError : public RemoteError {
 public:
  WorkerError(const std::string& what, int worker) : RemoteError(what), worker_(worker) {}
  int worker() const { return worker_; }

 private:
  int worker_;
};

class ProtocolError : public RemoteError {
 public:
  using RemoteError::RemoteError;
};

// configuration
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line) : Error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace wsrl
