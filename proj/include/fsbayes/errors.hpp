#pragma once

#include <stdexcept>
#include <string>

namespace fsbayes {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BasisError : public Error { using Error::Error; };
class ModelError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class LevelError : public Error { using Error::Error; };
class SupportError : public Error { using Error::Error; };
class GridError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

/// The observation sits where the scale estimate vanishes; no posterior exists there.
class DegenerateScaleError : public Error { using Error::Error; };

/// The estimated time change is not strictly increasing and positive.
class DegenerateQVError : public Error { using Error::Error; };

/// Raised only when a caller asks for an estimate from an invalid posterior.
class DegenerateEvidence : public Error { using Error::Error; };

class ConfigError : public Error {
 public:
  ConfigError(std::string field_path, const std::string& what)
      : Error(field_path + ": " + what), path_(std::move(field_path)) {}
  const std::string& field_path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace fsbayes
