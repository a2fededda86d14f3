#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fim {

// Root of the library's error hierarchy.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or arity mismatch between operands.
struct DimensionError : Error {
  using Error::Error;
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
  using Error::Error;
};

// Too few operands (e.g. fewer than two fields, empty series).
struct ArityError : Error {
  using Error::Error;
};

// Input that makes the operation undefined (all-zero matrix, single row).
struct DegenerateInputError : Error {
  using Error::Error;
};

// Metric undefined for the given inputs (e.g. single-class AUC).
struct MetricError : Error {
  using Error::Error;
};

// A cached trace no longer matches the parameters it was produced from.
struct StalenessError : Error {
  using Error::Error;
};

// Checkpoint contents disagree with the expected model layout.
struct SchemaError : Error {
  using Error::Error;
};

// Invalid experiment configuration.
struct ConfigError : Error {
  using Error::Error;
};

// Iterative method failed to converge within its sweep cap.
struct ConvergenceError : Error {
  std::size_t sweeps;
  ConvergenceError(const std::string& what, std::size_t sweeps_in)
      : Error(what), sweeps(sweeps_in) {}
};

// CSV ingestion failure; line is 1-based, 0 when not tied to a line.
struct IngestError : Error {
  std::size_t line;
  explicit IngestError(const std::string& what, std::size_t line_in = 0)
      : Error(what), line(line_in) {}
};

}  // namespace fim
