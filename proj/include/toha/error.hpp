// Copyright 2026 The toha Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace toha {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed bytes: bad magic, unsupported version, truncation, non-finite or
/// out-of-range weights.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A contract or invariant violation in otherwise well-formed input.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace toha
