#pragma once

#include <stdexcept>
#include <string>

namespace mds {

/// Bad user input: malformed files, inconsistent shapes in supplied data,
/// unknown names. The CLI maps these to exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape contract violated between tensors.
class ShapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace mds
