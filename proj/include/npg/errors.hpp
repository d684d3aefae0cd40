#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace npg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a parameter vector turns non-finite or exceeds the blow-up threshold.
class DivergedParameter : public Error {
 public:
  DivergedParameter(std::size_t index, const std::string& what)
      : Error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class SupportMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidStepsize : public Error {
 public:
  using Error::Error;
};

class SingularFeatureBlock : public Error {
 public:
  using Error::Error;
};

class ImplicitSolveFailed : public Error {
 public:
  using Error::Error;
};

class OracleNotConverged : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// Config or instance validation failure; field names the offending entry.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace npg
