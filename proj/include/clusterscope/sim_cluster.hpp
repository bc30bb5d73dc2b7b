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
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "clusterscope/types.hpp"

namespace clusterscope {

struct SimConfig {
  std::uint64_t seed = 1;
  Seconds queue_delay_min{5};
  Seconds queue_delay_max{60};
  Seconds run_duration_min{60};
  Seconds run_duration_max{3600};
  /// Fraction of jobs that fail; half of failures are memory-limit kills (exit 137).
  double failure_rate = 0.1;
  /// Reported elapsed time of every command; a transport with a shorter timeout fails.
  Seconds stall{0};
  /// advance_clock calls after termination before qacct knows the job.
  int accounting_lag = 0;
  bool accounting_unavailable = false;
  /// Hard wallclock limit reported as time_remaining.
  Seconds wallclock_limit{24 * 3600};
  Timestamp epoch = make_timestamp(2026, 1, 1);
};

/// Piecewise-constant memory usage: `bytes` from `offset` after start until the next step.
struct MemoryStep {
  Seconds offset{0};
  std::uint64_t bytes = 0;

  bool operator==(const MemoryStep&) const = default;
};

struct SimTransition {
  JobId job_id = 0;
  JobStatus from = JobStatus::Unknown;
  JobStatus to = JobStatus::Unknown;
  Timestamp at{};

  bool operator==(const SimTransition&) const = default;
};

struct SimJob {
  JobId job_id = 0;
  std::string owner;
  SubmitSpec spec;
  std::string submit_command;
  std::string stdout_path;
  std::string stderr_path;
  JobStatus state = JobStatus::Queued;
  Timestamp submit_at{};
  std::optional<Timestamp> start_at;
  std::optional<Timestamp> end_at;
  Seconds planned_delay{0};
  Seconds planned_duration{0};
  std::vector<MemoryStep> memory_curve;
  int exit_code = 0;
  bool deleted = false;
  /// advance_clock counter value when the job reached a terminal state.
  std::optional<std::int64_t> ended_at_advance;
  std::vector<SimTransition> history;

  bool live() const { return !is_terminal(state); }
  /// Peak memory over the curve up to `elapsed` run time; 0 before start.
  std::uint64_t max_memory_until(Seconds elapsed) const;
  std::uint64_t memory_at(Seconds elapsed) const;
  Seconds run_time_at(Timestamp now) const;
  /// Wallclock between start and end, 0 if the job never started.
  Seconds wallclock() const;

  bool operator==(const SimJob&) const = default;
};

struct LoggedCommand {
  CommandLine argv;
  std::string user;
  Timestamp at{};
};

/// Deterministic in-process cluster. Implements the qsub/qstat/qdel/qacct
/// grammar plus `tail` and `cat` over a small virtual file system.
/// All public members are safe to call concurrently; commands are applied in
/// the order the command log records.
class SimCluster {
 public:
  explicit SimCluster(SimConfig config = {});

  ExecResult handle_command(const CommandLine& argv, std::string_view as_user = "sim");
  std::vector<SimTransition> advance_clock(Seconds dt);
  std::vector<SimJob> ledger() const;
  std::vector<LoggedCommand> command_log() const;
  std::size_t command_count() const;
  Timestamp now() const;
  const SimConfig& config() const { return config_; }

  void put_file(const std::string& path, std::string content);
  std::optional<std::string> file(const std::string& path) const;
  void set_unreadable(const std::string& path);

 private:
  ExecResult qsub(const CommandLine& argv, std::string_view user);
  ExecResult qstat(const CommandLine& argv);
  ExecResult qdel(const CommandLine& argv);
  ExecResult qacct(const CommandLine& argv);
  ExecResult tail(const CommandLine& argv) const;
  ExecResult cat(const CommandLine& argv) const;
  SimJob* find(JobId id);
  void finish(SimJob& job, JobStatus to, Timestamp at, std::vector<SimTransition>& out);
  void append_file(const std::string& path, const std::string& line);

  SimConfig config_;
  mutable std::mutex mu_;
  std::mt19937_64 rng_;
  Timestamp now_;
  std::int64_t advance_count_ = 0;
  JobId next_id_ = 1;
  std::map<JobId, SimJob> jobs_;
  std::vector<LoggedCommand> log_;
  std::map<std::string, std::string> files_;
  std::set<std::string> unreadable_;
};

/// Fixture-grammar emitters; the reference implementation of what the adapter parses.
std::string emit_list(std::span<const SimJob> jobs, Timestamp now);
std::string emit_detail(const SimJob& job, Timestamp now, Seconds wallclock_limit);
std::string emit_accounting(const SimJob& job);
/// Shortest exact rendering with a binary suffix, e.g. 2684354560 -> "2.5G".
std::string format_memory_exact(std::uint64_t bytes);

}  // namespace clusterscope
