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

#ifndef MODELWARDEN_TOOLS_CLI_H_
#define MODELWARDEN_TOOLS_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace modelwarden::cli {

// Exit statuses. Scan verdicts use kOk/kMalicious so a pipeline can gate on them.
constexpr int kOk = 0;
constexpr int kOperational = 1;
constexpr int kMalicious = 2;
constexpr int kInvalidInput = 3;

// Runs one command line (args[0] is the program name). Results go to `out`,
// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace modelwarden::cli

#endif  // MODELWARDEN_TOOLS_CLI_H_
