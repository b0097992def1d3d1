// Copyright 2026 The mprelease Authors
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

namespace mprelease {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument or parameter outside its documented range.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class GridMismatchError : public Error {
 public:
  using Error::Error;
};

class BinMismatchError : public Error {
 public:
  using Error::Error;
};

class SupportMismatchError : public Error {
 public:
  using Error::Error;
};

// Gamma parameters outside the region where the required moments exist.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// sigma_R = 0: no finite Gamma shape reproduces a point mass.
class DegenerateDistributionError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

}  // namespace mprelease
