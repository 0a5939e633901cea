#pragma once

#include <stdexcept>
#include <string>

namespace kgcmlp {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters, shape mismatches, analytic domain violations.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// A value outside its representable range (weight bytes, key indices).
class RangeError : public Error {
 public:
  using Error::Error;
};

// Frame failed its CRC.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// Frame is well-formed but violates the protocol (reserved command, bad field).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Frame is truncated or has the wrong length for its command.
class FramingError : public Error {
 public:
  using Error::Error;
};

// An iterative solver failed to converge.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Socket setup or I/O failure in the datagram binding.
class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace kgcmlp
