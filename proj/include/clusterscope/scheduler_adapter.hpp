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

#include <memory>
#include <string_view>
#include <variant>
#include <vector>

#include "clusterscope/types.hpp"

namespace clusterscope {

enum class CommandKind { List, ListForUser, Detail, Cancel, Submit, Accounting };

std::string_view to_string(CommandKind kind);

struct UserRef {
  std::string name;
};

/// Payload for render_command. List takes monostate, ListForUser a UserRef,
/// Detail/Cancel/Accounting a JobId, Submit a SubmitSpec.
using CommandParams = std::variant<std::monostate, UserRef, JobId, SubmitSpec>;

/// Turns abstract requests into scheduler command lines and scheduler text
/// back into typed records. One implementation per scheduler family.
class SchedulerAdapter {
 public:
  virtual ~SchedulerAdapter() = default;

  virtual std::string_view family() const = 0;
  virtual bool supports(CommandKind kind) const = 0;

  /// Throws UnsupportedKind or InvalidParams.
  virtual CommandLine render_command(CommandKind kind, const CommandParams& params) const = 0;

  virtual std::vector<JobSummary> parse_job_list(std::string_view raw) const = 0;
  virtual JobDetail parse_job_detail(std::string_view raw) const = 0;
  virtual AccountingRecord parse_accounting(std::string_view raw) const = 0;
  /// Job id from the submit command's acknowledgement.
  virtual JobId parse_submit(std::string_view raw) const = 0;
  /// Total: unmatched tokens map to Unknown.
  virtual JobStatus map_status(std::string_view raw) const = 0;
};

/// Sun Grid Engine style adapter (qstat/qsub/qdel/qacct).
class SgeAdapter final : public SchedulerAdapter {
 public:
  std::string_view family() const override { return "sge"; }
  bool supports(CommandKind) const override { return true; }
  CommandLine render_command(CommandKind kind, const CommandParams& params) const override;
  std::vector<JobSummary> parse_job_list(std::string_view raw) const override;
  JobDetail parse_job_detail(std::string_view raw) const override;
  AccountingRecord parse_accounting(std::string_view raw) const override;
  JobId parse_submit(std::string_view raw) const override;
  JobStatus map_status(std::string_view raw) const override;
};

/// Free-standing status table lookup shared by SgeAdapter.
JobStatus map_sge_status(std::string_view raw);

/// Checks every SubmitSpec invariant; throws Error(InvalidParams) naming the field.
void validate_submit_spec(const SubmitSpec& spec);

}  // namespace clusterscope
