// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace negprompt {

/// Base of every error raised by the library. Callers that only need to
/// report failures can catch this; the subclasses exist so tests and the
/// service layer can map failures onto specific responses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class CountError : public Error {
 public:
  using Error::Error;
};

class MissingCategoryError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

class DegenerateJitterError : public Error {
 public:
  using Error::Error;
};

class EncodeError : public Error {
 public:
  using Error::Error;
};

class PlacementError : public Error {
 public:
  using Error::Error;
};

class BatchConstructionError : public Error {
 public:
  using Error::Error;
};

class CategoryError : public Error {
 public:
  using Error::Error;
};

class MissingNegativesError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint / dataset / prompt-bank parsing failures.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace negprompt
