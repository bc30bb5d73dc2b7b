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

#include "clusterscope/types.hpp"

namespace clusterscope {

std::string_view to_string(JobStatus status) {
  switch (status) {
    case JobStatus::Queued: return "Queued";
    case JobStatus::Running: return "Running";
    case JobStatus::Suspended: return "Suspended";
    case JobStatus::Error: return "Error";
    case JobStatus::Deleted: return "Deleted";
    case JobStatus::Completed: return "Completed";
    case JobStatus::Unknown: return "Unknown";
  }
  return "Unknown";
}

std::optional<JobStatus> status_from_code(int code) {
  if (code < 0 || code > static_cast<int>(JobStatus::Unknown)) return std::nullopt;
  return static_cast<JobStatus>(code);
}

}  // namespace clusterscope
