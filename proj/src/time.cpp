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

#include "clusterscope/time.hpp"

#include <charconv>
#include <cstdio>

namespace clusterscope {

namespace {

using namespace std::chrono;

bool parse_uint(std::string_view text, long long& out) {
  if (text.empty()) return false;
  for (char c : text) {
    if (c < '0' || c > '9') return false;
  }
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

std::optional<Timestamp> build(long long y, long long mo, long long d, long long h, long long mi,
                               long long s) {
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 59) return std::nullopt;
  year_month_day ymd{year{static_cast<int>(y)}, month{static_cast<unsigned>(mo)},
                     day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

struct Civil {
  int year;
  unsigned month, day;
  long long hour, minute, second;
};

Civil split(Timestamp t) {
  auto days = floor<std::chrono::days>(t);
  year_month_day ymd{days};
  hh_mm_ss hms{t - days};
  return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
          static_cast<unsigned>(ymd.day()), hms.hours().count(), hms.minutes().count(),
          hms.seconds().count()};
}

}  // namespace

Timestamp system_now() { return floor<seconds>(system_clock::now()); }

std::string format_duration(Seconds d) {
  long long total = d.count();
  bool negative = total < 0;
  if (negative) total = -total;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%02lld:%02lld:%02lld", negative ? "-" : "", total / 3600,
                (total / 60) % 60, total % 60);
  return buf;
}

std::optional<Seconds> parse_duration(std::string_view text) {
  auto first = text.find(':');
  auto second = text.rfind(':');
  if (first == std::string_view::npos || first == second) return std::nullopt;
  long long h = 0, m = 0, s = 0;
  if (!parse_uint(text.substr(0, first), h) ||
      !parse_uint(text.substr(first + 1, second - first - 1), m) ||
      !parse_uint(text.substr(second + 1), s))
    return std::nullopt;
  if (m > 59 || s > 59) return std::nullopt;
  return Seconds{h * 3600 + m * 60 + s};
}

std::string format_iso8601(Timestamp t) {
  auto c = split(t);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lldZ", c.year, c.month, c.day,
                c.hour, c.minute, c.second);
  return buf;
}

std::optional<Timestamp> parse_iso8601(std::string_view text) {
  // YYYY-MM-DDTHH:MM:SSZ
  if (text.size() != 20 || text[4] != '-' || text[7] != '-' || text[10] != 'T' ||
      text[13] != ':' || text[16] != ':' || text[19] != 'Z')
    return std::nullopt;
  long long y, mo, d, h, mi, s;
  if (!parse_uint(text.substr(0, 4), y) || !parse_uint(text.substr(5, 2), mo) ||
      !parse_uint(text.substr(8, 2), d) || !parse_uint(text.substr(11, 2), h) ||
      !parse_uint(text.substr(14, 2), mi) || !parse_uint(text.substr(17, 2), s))
    return std::nullopt;
  return build(y, mo, d, h, mi, s);
}

std::string format_sge_time(Timestamp t) {
  auto c = split(t);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%02u/%02u/%04d %02lld:%02lld:%02lld", c.month, c.day, c.year,
                c.hour, c.minute, c.second);
  return buf;
}

std::optional<Timestamp> parse_sge_time(std::string_view date, std::string_view time) {
  if (date.size() != 10 || date[2] != '/' || date[5] != '/') return std::nullopt;
  if (time.size() != 8 || time[2] != ':' || time[5] != ':') return std::nullopt;
  long long y, mo, d, h, mi, s;
  if (!parse_uint(date.substr(0, 2), mo) || !parse_uint(date.substr(3, 2), d) ||
      !parse_uint(date.substr(6, 4), y) || !parse_uint(time.substr(0, 2), h) ||
      !parse_uint(time.substr(3, 2), mi) || !parse_uint(time.substr(6, 2), s))
    return std::nullopt;
  return build(y, mo, d, h, mi, s);
}

Timestamp make_timestamp(int y, unsigned mo, unsigned d, int h, int mi, int s) {
  return sys_days{year{y} / month{mo} / day{d}} + hours{h} + minutes{mi} + seconds{s};
}

}  // namespace clusterscope
