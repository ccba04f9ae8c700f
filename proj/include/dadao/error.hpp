#pragma once

#include <stdexcept>
#include <string>

namespace dadao {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An input violates a documented precondition (rate <= 0, mu > L, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// A spectral quantity was requested on a graph that is not connected.
class DisconnectedError : public Error {
 public:
  using Error::Error;
};

// Events or propagations were applied out of time order.
class OrderingError : public Error {
 public:
  using Error::Error;
};

// Non-finite values appeared in a state or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A minimizer or saddle certificate failed its residual check.
class CertificationError : public Error {
 public:
  using Error::Error;
};

// Malformed input file or config.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace dadao
