#pragma once

#include <stdexcept>
#include <string>

namespace trimodal {

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParameterError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LoadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SplitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite value detected in a tensor after an operation.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace trimodal
