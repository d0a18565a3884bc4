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

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bert4rec/model.hpp"

namespace bert4rec::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

// Runs one command line. The primary result goes to `out`, diagnostics and
// the config echo to `err`. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Mean attention over the last `window` positions of each test-time input,
// one window x window matrix per [layer][head]. Rows are renormalized over
// the window before averaging. Inputs with padding inside the window are
// skipped; returns the number of inputs used through `used`.
std::vector<std::vector<std::vector<double>>> average_window_attention(
    const Bert4Rec& model, std::span<const std::vector<ItemId>> histories, std::size_t window,
    std::size_t* used = nullptr);

}  // namespace bert4rec::cli
