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

#include <atomic>
#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace clusterscope {

using Seconds = std::chrono::seconds;
/// All timestamps are UTC with second precision.
using Timestamp = std::chrono::sys_seconds;
using Clock = std::function<Timestamp()>;

Timestamp system_now();

/// Canonical duration text "HH:MM:SS"; hours are not wrapped at 24.
std::string format_duration(Seconds d);
std::optional<Seconds> parse_duration(std::string_view text);

/// "2026-01-31T13:05:00Z"
std::string format_iso8601(Timestamp t);
std::optional<Timestamp> parse_iso8601(std::string_view text);

/// Scheduler listing format "MM/DD/YYYY HH:MM:SS".
std::string format_sge_time(Timestamp t);
std::optional<Timestamp> parse_sge_time(std::string_view date, std::string_view time);

Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour = 0, int minute = 0,
                         int second = 0);

/// Manually advanced clock for tests and the simulator.
class FakeClock {
 public:
  explicit FakeClock(Timestamp start) : now_(start.time_since_epoch().count()) {}

  Timestamp now() const { return Timestamp{Seconds{now_.load()}}; }
  void advance(Seconds dt) { now_ += dt.count(); }
  void set(Timestamp t) { now_ = t.time_since_epoch().count(); }
  Clock as_clock() const {
    return [this] { return now(); };
  }

 private:
  std::atomic<std::int64_t> now_;
};

}  // namespace clusterscope
