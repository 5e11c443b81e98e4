#pragma once

#include <stdexcept>
#include <string>

namespace sepnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Extents or lengths disagree with what an operation requires.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value lies outside its documented domain (mode index, label, exponent...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// sigma_min fell below the numerical-rank tolerance.
class RankDeficientError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or inconsistent input files.
class FormatError : public Error {
 public:
  using Error::Error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace sepnet
