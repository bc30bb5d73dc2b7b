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

#include <condition_variable>
#include <map>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include "clusterscope/error.hpp"
#include "clusterscope/gateway.hpp"

namespace clusterscope {

struct PollConfig {
  Seconds interval{30};
  int detail_batch_limit = 8;
  /// Failed accounting lookups tolerated before a vanished job is finalized as Unknown.
  int retry_bound = 5;
  bool enabled = true;
};

struct PollError {
  std::optional<JobId> job_id;
  Errc code = Errc::TransportError;
  Stage stage = Stage::None;
  std::string message;
};

struct PollReport {
  Timestamp at{};
  std::size_t listed_jobs = 0;
  std::size_t detail_queries_issued = 0;
  std::size_t new_jobs = 0;
  std::size_t finalized_jobs = 0;
  std::vector<JobId> detailed_ids;
  std::vector<JobId> deferred_ids;
  std::vector<PollError> errors;
};

/// Two-phase poller: one listing, then one detail query per active job
/// (bounded per tick, round-robin by job id). Jobs that leave the listing
/// are finalized from accounting records.
class StatusScheduler {
 public:
  StatusScheduler(Gateway& gateway, JobStore& store, PollConfig config = {},
                  Clock clock = system_now);
  ~StatusScheduler();

  PollReport tick(Timestamp now);
  /// Same protocol restricted to one user's jobs, run under that user's principal.
  PollReport refresh_user(const std::string& user, Timestamp now);
  /// Returns the number of jobs finalized; failures go to `report`.
  std::size_t reconcile_disappeared(const std::vector<JobId>& ids, const std::string& principal,
                                    PollReport& report);

  /// Background loop calling tick every interval until stop().
  void start();
  void stop();

  std::optional<PollReport> last_report() const;
  std::map<JobId, int> pending_retries() const;
  const PollConfig& config() const { return config_; }

 private:
  PollReport poll(const std::string& principal, const std::optional<std::string>& user,
                  Timestamp now);
  std::vector<JobId> select_due(const std::vector<JobId>& active, JobId& cursor) const;
  void run(std::stop_token stop);

  Gateway& gateway_;
  JobStore& store_;
  PollConfig config_;
  Clock clock_;

  mutable std::mutex mu_;
  std::mutex tick_mu_;  // one tick at a time
  JobId cursor_ = 0;
  std::map<std::string, JobId> user_cursors_;
  std::map<JobId, int> retries_;
  std::optional<PollReport> last_report_;

  std::jthread thread_;
  std::condition_variable_any wake_;
};

/// Whether a listed job still gets detail queries.
bool is_active(JobStatus status);

}  // namespace clusterscope
