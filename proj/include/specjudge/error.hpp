// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace specjudge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller handed us something outside an operation's precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Malformed, inconsistent or degenerate data (files, feature dims, labels).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A remote completion endpoint answered with a non-2xx status after retries,
/// or could not be reached at all (status 0).
class RemoteError : public Error {
 public:
  RemoteError(int status, const std::string& what) : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

/// A remote endpoint answered 2xx with a body we cannot interpret.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace specjudge
