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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clusterscope/time.hpp"

namespace clusterscope {

using JobId = std::int64_t;
/// argv-style token list handed verbatim to a transport.
using CommandLine = std::vector<std::string>;

/// Stable integer codes; the job archive persists these values.
enum class JobStatus : int {
  Queued = 0,
  Running = 1,
  Suspended = 2,
  Error = 3,
  Deleted = 4,
  Completed = 5,
  Unknown = 6,
};

std::string_view to_string(JobStatus status);
std::optional<JobStatus> status_from_code(int code);

/// Outcomes an accounting record can report.
constexpr bool is_terminal(JobStatus s) {
  return s == JobStatus::Completed || s == JobStatus::Error || s == JobStatus::Deleted;
}

/// One row of the live listing.
struct JobSummary {
  JobId job_id = 0;
  std::string job_name;
  std::string user;
  JobStatus status = JobStatus::Unknown;
  Timestamp started_or_submitted_at{};
  std::string queue_or_node;  // empty while queued
  int slots = 1;

  bool operator==(const JobSummary&) const = default;
};

/// Per-job view from the detail query.
struct JobDetail {
  JobId job_id = 0;
  std::string job_name;
  std::string owner;
  std::string script_path;
  std::string source_directory;
  std::string submit_command;
  std::string output_path;
  std::string error_path;
  std::string memory_requested;
  bool parallel = false;
  int cores = 1;
  Seconds cpu_time_used{0};
  std::uint64_t current_memory = 0;
  std::uint64_t maximum_memory = 0;
  Seconds run_time{0};
  std::optional<Seconds> time_remaining;

  bool operator==(const JobDetail&) const = default;
};

/// What a user asks for when creating a job.
struct SubmitSpec {
  std::string job_name;
  std::string script_path;
  std::string source_directory;
  std::string memory_requested = "1G";
  int cores = 1;
  bool parallel = false;
  std::optional<std::string> output_path;
  std::vector<std::string> extra_args;

  bool operator==(const SubmitSpec&) const = default;
};

struct AccountingRecord {
  JobId job_id = 0;
  JobStatus final_status = JobStatus::Unknown;
  Seconds final_run_time{0};
  std::uint64_t maximum_memory = 0;
  int exit_code = 0;

  bool operator==(const AccountingRecord&) const = default;
};

struct ExecResult {
  std::string stdout_text;
  std::string stderr_text;
  int exit_code = 0;
  std::chrono::milliseconds elapsed{0};
};

}  // namespace clusterscope
