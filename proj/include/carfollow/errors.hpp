#pragma once

#include <stdexcept>
#include <string>

namespace carfollow {

// Root of every error raised by the library. Subclasses name the failed
// contract so callers (and the CLI exit-code mapping) can tell input problems
// from internal ones.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CARFOLLOW_DEFINE_ERROR(Name)       \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  };

CARFOLLOW_DEFINE_ERROR(FormatError)       // malformed bytes / text
CARFOLLOW_DEFINE_ERROR(DataError)         // well-formed but violates an invariant
CARFOLLOW_DEFINE_ERROR(ShapeError)        // mismatched or degenerate dimensions
CARFOLLOW_DEFINE_ERROR(CalibrationError)
CARFOLLOW_DEFINE_ERROR(DomainError)       // argument outside the function's domain
CARFOLLOW_DEFINE_ERROR(GeometryError)
CARFOLLOW_DEFINE_ERROR(EmptyInputError)
CARFOLLOW_DEFINE_ERROR(ConfigError)
CARFOLLOW_DEFINE_ERROR(SchemaError)
CARFOLLOW_DEFINE_ERROR(ScenarioError)

#undef CARFOLLOW_DEFINE_ERROR

}  // namespace carfollow
