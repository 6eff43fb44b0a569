// Copyright (c) 2026 The saasr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SAASR_TOOLS_CLI_H_
#define SAASR_TOOLS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace saasr::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kRuntimeAbort = 3,
  kScoringMismatch = 4,
};

// Runs `saasr <subcommand> ...`; args excludes the program name.
int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

// Oracle-equivalence suites behind `saasr selftest`. Returns the number of
// failed suites and prints one line per suite.
int RunSelfTest(std::ostream& out, unsigned long long seed);

}  // namespace saasr::cli

#endif  // SAASR_TOOLS_CLI_H_
