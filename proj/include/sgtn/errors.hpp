// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace sgtn {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidShape : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf was produced by an operation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class CorruptData : public Error {
 public:
  using Error::Error;
};

/// Raised by dataset / checkpoint readers; the message names the offending record.
class LoadError : public Error {
 public:
  using Error::Error;
};

}  // namespace sgtn
