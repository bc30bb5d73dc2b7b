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

#include "clusterscope/units.hpp"

#include "clusterscope/error.hpp"

namespace clusterscope {

std::uint64_t parse_memory(std::string_view token) {
  auto fail = [&](const char* why) {
    return Error(Errc::UnitError, "memory token '" + std::string(token) + "': " + why);
  };
  if (token.empty()) throw fail("empty");

  unsigned shift = 0;
  switch (token.back()) {
    case 'K': shift = 10; break;
    case 'M': shift = 20; break;
    case 'G': shift = 30; break;
    case 'T': shift = 40; break;
    default:
      if (token.back() < '0' || token.back() > '9') throw fail("unrecognized suffix");
  }
  std::string_view digits = shift ? token.substr(0, token.size() - 1) : token;
  if (digits.empty()) throw fail("missing number");

  // Exact rational arithmetic: value = mantissa / 10^scale * 2^shift.
  unsigned __int128 mantissa = 0;
  unsigned __int128 scale = 1;
  bool seen_point = false;
  bool seen_digit = false;
  for (char c : digits) {
    if (c == '.') {
      if (seen_point) throw fail("malformed number");
      seen_point = true;
      continue;
    }
    if (c < '0' || c > '9') throw fail("malformed number");
    seen_digit = true;
    mantissa = mantissa * 10 + static_cast<unsigned>(c - '0');
    if (seen_point) scale *= 10;
    if (mantissa > (static_cast<unsigned __int128>(1) << 80)) throw fail("out of range");
  }
  if (!seen_digit) throw fail("malformed number");
  unsigned __int128 numerator = mantissa << shift;
  unsigned __int128 bytes = (numerator + scale / 2) / scale;
  if (bytes > static_cast<unsigned __int128>(INT64_MAX)) throw fail("out of range");
  return static_cast<std::uint64_t>(bytes);
}

std::string_view trim(std::string_view text) {
  const char* ws = " \t\r\n\v\f";
  auto b = text.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = text.find_last_not_of(ws);
  return text.substr(b, e - b + 1);
}

std::vector<std::string_view> split_ws(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\r')) ++i;
    std::size_t start = i;
    while (i < text.size() && text[i] != ' ' && text[i] != '\t' && text[i] != '\r') ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      out.push_back(text.substr(start));
      break;
    }
    out.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return out;
}

bool has_control_chars(std::string_view text) {
  for (unsigned char c : text) {
    if (c < 0x20 || c == 0x7f) return true;
  }
  return false;
}

bool has_whitespace(std::string_view text) {
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') return true;
  }
  return false;
}

}  // namespace clusterscope
