#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace trajselect {

// Error categories map to CLI exit codes: config -> 2, data -> 3, numeric -> 4.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SchemaError : DataError {
  SchemaError(std::size_t line, const std::string& message)
      : DataError("line " + std::to_string(line) + ": " + message),
        line(line) {}
  std::size_t line;
};

struct StepAlignmentError : DataError {
  using DataError::DataError;
};

struct VocabError : DataError {
  using DataError::DataError;
};

struct EmptyClassError : DataError {
  using DataError::DataError;
};

struct EmptyTrajectoryError : DataError {
  using DataError::DataError;
};

struct EmptyCandidatesError : DataError {
  using DataError::DataError;
};

struct LengthMismatchError : DataError {
  using DataError::DataError;
};

struct DimensionMismatchError : DataError {
  using DataError::DataError;
};

struct SequenceTooLongError : DataError {
  using DataError::DataError;
};

struct GradCheckError : NumericError {
  using NumericError::NumericError;
};

struct NonFiniteError : NumericError {
  using NumericError::NumericError;
};

}  // namespace trajselect
