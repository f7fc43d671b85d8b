#pragma once

#include <stdexcept>
#include <string>

namespace cari {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller passed a value that violates an operation's precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A file exists but its contents are malformed.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Dataset items are missing or do not line up; `what()` names the basename.
class LoadError : public Error {
 public:
  LoadError(const std::string& basename, const std::string& reason)
      : Error(basename + ": " + reason), basename_(basename) {}
  const std::string& basename() const noexcept { return basename_; }

 private:
  std::string basename_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage needs an artifact that an earlier stage has not produced.
class DependencyError : public Error {
 public:
  DependencyError(const std::string& stage, const std::string& reason)
      : Error("[" + stage + "] " + reason), stage_(stage) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Training data violates the model contract (e.g. a label >= C).
class DataError : public Error {
 public:
  using Error::Error;
};

class EmptyEvaluationError : public Error {
 public:
  using Error::Error;
};

}  // namespace cari
