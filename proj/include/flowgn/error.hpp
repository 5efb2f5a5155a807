#pragma once

#include <stdexcept>
#include <string>

namespace flowgn {

/// Base of every error the library throws. `exit_code()` follows the CLI
/// convention: 1 for usage/configuration problems, 2 for runtime failures.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 2; }
};

#define FLOWGN_DEFINE_ERROR(Name, Code)                                        \
  class Name : public Error {                                                  \
  public:                                                                      \
    using Error::Error;                                                        \
    int exit_code() const noexcept override { return Code; }                   \
  };

FLOWGN_DEFINE_ERROR(ArgumentError, 1)
FLOWGN_DEFINE_ERROR(ConfigError, 1)
FLOWGN_DEFINE_ERROR(FormatError, 2)
FLOWGN_DEFINE_ERROR(ParseError, 2)
FLOWGN_DEFINE_ERROR(IndexError, 2)
FLOWGN_DEFINE_ERROR(ShapeError, 2)
FLOWGN_DEFINE_ERROR(NumericsError, 2)
FLOWGN_DEFINE_ERROR(DegenerateWalkError, 2)
FLOWGN_DEFINE_ERROR(TooLargeError, 2)
FLOWGN_DEFINE_ERROR(EmptyInfluenceError, 2)

#undef FLOWGN_DEFINE_ERROR

} // namespace flowgn
