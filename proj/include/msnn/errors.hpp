#pragma once

#include <stdexcept>
#include <string>

namespace msnn {

// Bad parameters, malformed config files, invalid CLI combinations. Exit 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A state variable or adjoint became NaN/Inf. Exit 3.
struct NonFiniteError : std::runtime_error {
  explicit NonFiniteError(const std::string& what) : std::runtime_error(what) {}
};

// Input outside the documented domain of an operation. Exit 3.
struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// Incompatible tensor shapes. Exit 3.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Dataset / checkpoint file problems. Exit 4.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};
struct BadMagicError : DataError {
  explicit BadMagicError(const std::string& what) : DataError(what) {}
};
struct TruncatedFileError : DataError {
  explicit TruncatedFileError(const std::string& what) : DataError(what) {}
};
struct UnsupportedDtypeError : DataError {
  explicit UnsupportedDtypeError(const std::string& what) : DataError(what) {}
};
struct ShapeMismatchError : DataError {
  explicit ShapeMismatchError(const std::string& what) : DataError(what) {}
};
struct MissingLabelError : DataError {
  explicit MissingLabelError(const std::string& what) : DataError(what) {}
};

}  // namespace msnn
