// Copyright 2026 The bert4rec-cpp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace bert4rec {

// Base of every error raised by the library. The category decides the CLI
// exit code: usage/config problems, data problems, or numeric failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated API precondition (wrong length, non-scalar loss, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

class IndexError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Invalid hyperparameter or option value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Everything that originates in input files or dataset contents.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

class EmptyDatasetError : public DataError {
 public:
  using DataError::DataError;
};

class CandidateShortageError : public DataError {
 public:
  using DataError::DataError;
};

class IntegrityError : public DataError {
 public:
  using DataError::DataError;
};

// Checkpoint/config or checkpoint/dataset disagreement.
class MismatchError : public DataError {
 public:
  using DataError::DataError;
};

// Non-finite loss or similar numeric breakdown during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace bert4rec
