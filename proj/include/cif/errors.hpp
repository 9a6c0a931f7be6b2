// cif/errors.hpp

// Copyright 2026  The cif-align Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef CIF_ERRORS_HPP_
#define CIF_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace cif {

// Violated precondition of a library call (bad shapes, out-of-range ids).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Shape mismatch between operands.
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Invalid configuration value or unknown key. CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable, unwritable or malformed data files. CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss or degenerate weights during training. CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::string term, const std::string& what)
      : std::runtime_error(what), term_(std::move(term)) {}
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

// CTC target cannot be aligned to the available frames.
class InfeasibleAlignmentError : public ContractError {
 public:
  using ContractError::ContractError;
};

}  // namespace cif

#endif  // CIF_ERRORS_HPP_
