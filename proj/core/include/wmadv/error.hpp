#pragma once

#include <stdexcept>
#include <string>

namespace wmadv {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or truncated encoded image.
class DecodeError : public Error {
 public:
  using Error::Error;
};

// Plane/image sizes that violate a transform or embedder precondition.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid parameter values or flag combinations.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed configuration file (e.g. builtin oracle weights).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Transport failure talking to an oracle. Callers may retry.
class OracleError : public Error {
 public:
  using Error::Error;
};

// Oracle answered, but the payload violates the wire protocol or the
// ClassProbs invariants.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Requested feature layer (or feature support at all) is not offered.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace wmadv
