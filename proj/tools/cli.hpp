// Copyright 2026 The NegMerge Authors.
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

#ifndef NEGMERGE_TOOLS_CLI_HPP_
#define NEGMERGE_TOOLS_CLI_HPP_

#include <ostream>
#include <string>
#include <vector>

namespace negmerge::cli {

enum ExitCode : int {
  kOk = 0,
  kIoError = 1,
  kSchemaError = 2,
  kConfigError = 3,
  kStageError = 4,
};

// Runs one invocation; args excludes the program name. Reports go to `out`,
// one-line diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace negmerge::cli

#endif  // NEGMERGE_TOOLS_CLI_HPP_
