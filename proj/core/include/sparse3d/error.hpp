// Copyright 2026 The sparse3d Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SPARSE3D_ERROR_HPP_
#define SPARSE3D_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace sparse3d {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument values, violated preconditions, inconsistent inputs.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures: missing files, unreadable paths, failed writes.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents. Messages carry the offending line number
// when one is available.
class ParseError : public IoError {
 public:
  using IoError::IoError;
};

// Scene synthesis could not satisfy its constraints (e.g. the requested
// number of non-overlapping cars does not fit in the lane).
class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace sparse3d

#endif  // SPARSE3D_ERROR_HPP_
