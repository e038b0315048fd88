// Copyright 2026 The invhls Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef INVHLS_ERRORS_H_
#define INVHLS_ERRORS_H_

#include <stdexcept>
#include <string>

namespace invhls {

// A declaration (design space, kernel, config, graph) violates its invariants.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite values where finite ones are required.
class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Incompatible tensor shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Every option of a sampling site was masked by the HLS rules.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace invhls

#endif  // INVHLS_ERRORS_H_
