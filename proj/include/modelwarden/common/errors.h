// Copyright 2026 The ModelWarden Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MODELWARDEN_COMMON_ERRORS_H_
#define MODELWARDEN_COMMON_ERRORS_H_

#include <stdexcept>
#include <string>

namespace modelwarden {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input could not be parsed or failed structural validation. The CLI maps
// this family to exit status 3; every other Error maps to 1.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace modelwarden

#endif  // MODELWARDEN_COMMON_ERRORS_H_
