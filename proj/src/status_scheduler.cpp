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

#include "clusterscope/status_scheduler.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <set>

namespace clusterscope {

namespace {

PollError to_poll_error(const Error& e, std::optional<JobId> id) {
  return PollError{id, e.code(), e.stage(), e.what()};
}

}  // namespace

bool is_active(JobStatus status) { return status != JobStatus::Deleted; }

StatusScheduler::StatusScheduler(Gateway& gateway, JobStore& store, PollConfig config, Clock clock)
    : gateway_(gateway), store_(store), config_(config), clock_(std::move(clock)) {
  if (config_.interval < Seconds{1}) throw Error(Errc::InvalidParams, "poll interval below 1 s");
  if (config_.detail_batch_limit < 1)
    throw Error(Errc::InvalidParams, "detail batch limit must be positive");
  if (config_.retry_bound < 0) throw Error(Errc::InvalidParams, "retry bound must be >= 0");
}

StatusScheduler::~StatusScheduler() { stop(); }

std::vector<JobId> StatusScheduler::select_due(const std::vector<JobId>& active,
                                               JobId& cursor) const {
  std::vector<JobId> sorted = active;
  std::sort(sorted.begin(), sorted.end());
  auto split = std::upper_bound(sorted.begin(), sorted.end(), cursor);
  std::vector<JobId> order(split, sorted.end());
  order.insert(order.end(), sorted.begin(), split);
  if (order.size() > static_cast<std::size_t>(config_.detail_batch_limit))
    order.resize(static_cast<std::size_t>(config_.detail_batch_limit));
  if (!order.empty()) cursor = order.back();
  return order;
}

PollReport StatusScheduler::tick(Timestamp now) {
  return poll(std::string(kSystemPrincipal), std::nullopt, now);
}

PollReport StatusScheduler::refresh_user(const std::string& user, Timestamp now) {
  if (user.empty()) throw Error(Errc::InvalidParams, "refresh needs a user");
  return poll(user, user, now);
}

PollReport StatusScheduler::poll(const std::string& principal,
                                 const std::optional<std::string>& user, Timestamp now) {
  std::lock_guard serial(tick_mu_);
  PollReport report;
  report.at = now;

  // Phase 1: one listing.
  JobRequest list{principal, RequestKind::Status, std::monostate{}};
  if (user) list.params = UserRef{*user};
  std::vector<JobSummary> listing;
  try {
    auto response = gateway_.handle(list);
    listing = std::move(response.listing);
    report.new_jobs = response.inserted_ids.size();
  } catch (const Error& e) {
    // Without a listing nothing can be said about disappearance either.
    report.errors.push_back(to_poll_error(e, std::nullopt));
    std::lock_guard lock(mu_);
    if (!user) last_report_ = report;
    return report;
  }
  report.listed_jobs = listing.size();

  std::set<JobId> listed;
  std::vector<JobId> active;
  for (const auto& row : listing) {
    listed.insert(row.job_id);
    if (is_active(row.status)) active.push_back(row.job_id);
  }
  // Phase 2: detail queries, round-robin.
  std::vector<JobId> due;
  {
    std::lock_guard lock(mu_);
    JobId& cursor = user ? user_cursors_[*user] : cursor_;
    due = select_due(active, cursor);
  }
  for (JobId id : due) {
    try {
      gateway_.handle({principal, RequestKind::StatusDetail, id});
      ++report.detail_queries_issued;
      report.detailed_ids.push_back(id);
    } catch (const Error& e) {
      if (e.code() != Errc::Throttled) ++report.detail_queries_issued;
      report.errors.push_back(to_poll_error(e, id));
    }
  }

  // Records the store still considers live but the cluster no longer lists.
  std::vector<JobId> gone;
  for (JobId id : store_.unfinalized_ids()) {
    if (listed.count(id)) continue;
    if (user) {
      auto rec = store_.find_job(id);
      if (!rec || rec->user != *user) continue;
    }
    gone.push_back(id);
  }
  report.finalized_jobs = reconcile_disappeared(gone, principal, report);

  std::lock_guard lock(mu_);
  if (!user) last_report_ = report;
  return report;
}

std::size_t StatusScheduler::reconcile_disappeared(const std::vector<JobId>& ids,
                                                   const std::string& principal,
                                                   PollReport& report) {
  std::size_t finalized = 0;
  for (JobId id : ids) {
    bool give_up = false;
    try {
      auto response = gateway_.handle({principal, RequestKind::Accounting, id});
      try {
        store_.finalize_job(id, *response.accounting);
        ++finalized;
      } catch (const Error& e) {
        if (e.code() != Errc::AlreadyFinal) throw;
      }
      std::lock_guard lock(mu_);
      retries_.erase(id);
      continue;
    } catch (const Error& e) {
      if (e.code() == Errc::Throttled) {
        report.deferred_ids.push_back(id);
        continue;
      }
      if (e.code() != Errc::NotFinished) report.errors.push_back(to_poll_error(e, id));
      std::lock_guard lock(mu_);
      give_up = ++retries_[id] > config_.retry_bound;
      if (give_up) retries_.erase(id);
    }
    if (!give_up) {
      report.deferred_ids.push_back(id);
      continue;
    }
    try {
      auto rec = store_.get_job(id);
      AccountingRecord unknown;
      unknown.job_id = id;
      unknown.final_status = JobStatus::Unknown;
      unknown.final_run_time = parse_duration(rec.run_time).value_or(Seconds{0});
      unknown.maximum_memory = rec.maximum_memory;
      store_.finalize_job(id, unknown);
      ++finalized;
      spdlog::warn("job {} finalized as Unknown after {} accounting attempts", id,
                   config_.retry_bound + 1);
    } catch (const Error& e) {
      if (e.code() != Errc::AlreadyFinal) report.errors.push_back(to_poll_error(e, id));
    }
  }
  return finalized;
}

void StatusScheduler::start() {
  if (thread_.joinable()) return;
  thread_ = std::jthread([this](std::stop_token st) { run(st); });
}

void StatusScheduler::stop() {
  if (!thread_.joinable()) return;
  thread_.request_stop();
  wake_.notify_all();
  thread_.join();
}

void StatusScheduler::run(std::stop_token stop) {
  std::mutex wait_mu;
  while (!stop.stop_requested()) {
    if (config_.enabled) {
      try {
        auto r = tick(clock_());
        if (!r.errors.empty())
          spdlog::warn("poll tick: {} errors, first: {}", r.errors.size(), r.errors.front().message);
      } catch (const std::exception& e) {
        spdlog::error("poll tick failed: {}", e.what());
      }
    }
    std::unique_lock lock(wait_mu);
    wake_.wait_for(lock, stop, config_.interval, [] { return false; });
  }
}

std::optional<PollReport> StatusScheduler::last_report() const {
  std::lock_guard lock(mu_);
  return last_report_;
}

std::map<JobId, int> StatusScheduler::pending_retries() const {
  std::lock_guard lock(mu_);
  return retries_;
}

}  // namespace clusterscope
