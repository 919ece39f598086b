// SPDX-License-Identifier: Apache-2.0
//
// cfisac: cooperative ISAC multistatic sensing toolkit
// Copyright (C) 2026 The cfisac authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cfisac
{

// Runs one subcommand; args exclude the program name. Result records go to
// `out` (or the --out file) as newline-delimited JSON, diagnostics to `err`.
// Returns 0 on success, 1 on runtime errors and 2 on usage or config errors.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace cfisac
