// Copyright 2026 The Clusterscope Authors
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

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace clusterscope {

/// Parses a scheduler memory token: decimal number with an optional binary
/// suffix K/M/G/T (2^10 .. 2^40). "N/A" is not accepted here.
/// Throws Error(UnitError) on a bad suffix or malformed number.
std::uint64_t parse_memory(std::string_view token);

std::string_view trim(std::string_view text);
std::vector<std::string_view> split_ws(std::string_view text);
std::vector<std::string_view> split_lines(std::string_view text);

/// True if the text contains a byte < 0x20 or 0x7f.
bool has_control_chars(std::string_view text);
bool has_whitespace(std::string_view text);

}  // namespace clusterscope
