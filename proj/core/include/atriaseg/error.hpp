#pragma once

#include <stdexcept>
#include <string>

namespace atriaseg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two grids that must share dims/spacing do not.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameters, config documents or dataset layout.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A binary mask expected to hold foreground has none.
class EmptyMaskError : public Error {
 public:
  using Error::Error;
};

/// A segmentation backend failed to produce a usable label map.
class BackendError : public Error {
 public:
  using Error::Error;
};

}  // namespace atriaseg
