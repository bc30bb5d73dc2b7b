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

// Frozen SGE-style command and output grammar. The adapter's parser and the
// simulator's emitter both build on these constants.

#include <array>
#include <string_view>

#include "clusterscope/types.hpp"

namespace clusterscope::sge {

inline constexpr std::string_view kQstat = "qstat";
inline constexpr std::string_view kQsub = "qsub";
inline constexpr std::string_view kQdel = "qdel";
inline constexpr std::string_view kQacct = "qacct";
inline constexpr std::string_view kAllUsers = "*";

inline constexpr std::string_view kListHeader =
    "job-ID  prior   name       user         state submit/start at     queue                  "
    "        slots ja-task-ID";
inline constexpr std::string_view kListSeparator =
    "----------------------------------------------------------------------------------------"
    "-------------------------";

// Detail stanza keys (qstat -j), in emission order.
inline constexpr std::string_view kJobNumber = "job_number";
inline constexpr std::string_view kJobName = "job_name";
inline constexpr std::string_view kOwner = "owner";
inline constexpr std::string_view kWorkdir = "sge_o_workdir";
inline constexpr std::string_view kCmd = "cmd";
inline constexpr std::string_view kScriptFile = "script_file";
inline constexpr std::string_view kStdoutPath = "stdout_path";
inline constexpr std::string_view kStderrPath = "stderr_path";
inline constexpr std::string_view kHardResources = "hard_resource_list";
inline constexpr std::string_view kParallel = "parallel";
inline constexpr std::string_view kSlots = "slots";
inline constexpr std::string_view kUsage = "usage";
inline constexpr std::string_view kRuntime = "runtime";
inline constexpr std::string_view kTimeRemaining = "time_remaining";

inline constexpr std::string_view kVmemResource = "h_vmem";
inline constexpr std::string_view kUsageCpu = "cpu";
inline constexpr std::string_view kUsageVmem = "vmem";
inline constexpr std::string_view kUsageMaxvmem = "maxvmem";

// Accounting stanza keys (qacct -j), whitespace separated "key value".
inline constexpr std::string_view kExitStatus = "exit_status";
inline constexpr std::string_view kDeleted = "deleted";
inline constexpr std::string_view kWallclock = "ru_wallclock";

inline constexpr std::string_view kSubmittedPrefix = "Your job ";
inline constexpr std::string_view kAccountingMissing = "not found";

struct StateLetters {
  std::string_view letters;
  JobStatus status;
};

/// Raw state tokens. The first entry for a status is what the emitter prints.
inline constexpr std::array<StateLetters, 9> kStateTable{{
    {"qw", JobStatus::Queued},
    {"hqw", JobStatus::Queued},
    {"r", JobStatus::Running},
    {"t", JobStatus::Running},
    {"s", JobStatus::Suspended},
    {"S", JobStatus::Suspended},
    {"Eqw", JobStatus::Error},
    {"dr", JobStatus::Deleted},
    {"dt", JobStatus::Deleted},
}};

/// Emitted letters for a live status; empty for statuses the listing never shows.
constexpr std::string_view letters_for(JobStatus status) {
  for (const auto& entry : kStateTable) {
    if (entry.status == status) return entry.letters;
  }
  return {};
}

}  // namespace clusterscope::sge
