// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace shapefill {

using Vec3 = Eigen::Vector3d;
using Shape3 = std::array<int, 3>;

// Error hierarchy. The CLI maps each class onto a stable exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File missing, unreadable or unwritable.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed input, violated precondition or inconsistent configuration.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that uses a file-format feature we do not read.
class UnsupportedError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Non-finite values appeared during training or inference.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Process exit codes.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitIo = 2, kExitValidation = 3, kExitDivergence = 4,
                      kExitAssertion = 5 };

inline int exit_code_of(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e)) return kExitIo;
  if (dynamic_cast<const ValidationError*>(&e)) return kExitValidation;
  if (dynamic_cast<const DivergenceError*>(&e)) return kExitDivergence;
  return kExitFailure;
}

}  // namespace shapefill
