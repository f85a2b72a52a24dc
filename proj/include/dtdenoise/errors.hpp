// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace dtd {

/// Base class for all dtdenoise errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Array shapes or ranks are inconsistent with the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A configuration value violates the documented constraints.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An object is in the wrong state for the requested operation.
class StateError : public Error {
 public:
  using Error::Error;
};

/// A computation produced or encountered non-finite values.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A serialized artifact (checkpoint, manifest, config) is malformed.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Filesystem / IO failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dtd
