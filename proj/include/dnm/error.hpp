#ifndef DNM_ERROR_HPP
#define DNM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace dnm {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand extents do not satisfy an operation's shape contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A NaN/Inf appeared where a finite value is required, or a gradient check failed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Problems reading or writing files. `kind` tells malformed content apart.
class FormatError : public Error {
 public:
  enum class Kind {
    io,
    bad_magic,
    malformed_header,
    truncated,
    trailing_data,
    unsupported_maxval,
    unsupported_endianness,
    unsupported_version,
  };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace dnm

#endif  // DNM_ERROR_HPP
