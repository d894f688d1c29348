#pragma once

#include <stdexcept>
#include <string>

namespace mvde {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument: bad parameter value or mismatched dimensions.
class ParameterError : public Error {
 public:
  using Error::Error;
};

class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

/// An operation was invoked on an object that is not ready for it
/// (e.g. an automatic Welsch scale that has not been bound yet).
class StateError : public Error {
 public:
  using Error::Error;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

class PlanError : public Error {
 public:
  using Error::Error;
};

/// Scene description cannot be rendered.
class SceneError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value met inside an iterative solver.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, int iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

/// File could not be read or parsed. The message names the file.
class IngestionError : public Error {
 public:
  IngestionError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace mvde
