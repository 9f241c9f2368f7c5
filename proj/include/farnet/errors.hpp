// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace farnet {

// Error categories map one-to-one onto CLI exit codes (see tools/farnet.cpp).
enum class ErrorKind { Dimension, Degenerate, Index, Config, Data, Checkpoint };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& m) : Error(ErrorKind::Dimension, m) {}
};

class DegenerateVectorError : public Error {
 public:
  explicit DegenerateVectorError(const std::string& m) : Error(ErrorKind::Degenerate, m) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& m) : Error(ErrorKind::Index, m) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error(ErrorKind::Config, m) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& m) : Error(ErrorKind::Data, m) {}
};

class CheckpointError : public Error {
 public:
  explicit CheckpointError(const std::string& m) : Error(ErrorKind::Checkpoint, m) {}
};

}  // namespace farnet
