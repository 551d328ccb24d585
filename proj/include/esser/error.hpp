// Copyright 2026 The esser-toolkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <string>

namespace esser {

// Base of every error the toolkit throws. Domain errors map to CLI exit 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand lengths or sample rates disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Projection onto / normalization by a zero-energy vector.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// Input outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Inconsistent configuration (e.g. ESSER without a noise estimate).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Request exceeds a documented enumeration bound.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Malformed or unsupported audio / manifest content.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// The loss sits on its denominator floor, where no gradient exists.
class GradientUndefined : public Error {
 public:
  using Error::Error;
};

}  // namespace esser
