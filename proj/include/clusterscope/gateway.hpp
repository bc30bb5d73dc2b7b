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

#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

#include "clusterscope/connection_manager.hpp"
#include "clusterscope/job_store.hpp"
#include "clusterscope/scheduler_adapter.hpp"

namespace clusterscope {

/// Principal the status poller runs under. '@' never appears in cluster logins.
inline constexpr std::string_view kSystemPrincipal = "@system";

enum class RequestKind { Status, StatusDetail, Cancel, Submit, Output, Accounting };

std::string_view to_string(RequestKind kind);

/// Files to read for one job; `lines` empty means whole files.
struct OutputParams {
  JobId job_id = 0;
  std::vector<std::string> paths;
  std::optional<int> lines;
};

/// Status takes monostate (every user) or UserRef, StatusDetail/Cancel/Accounting
/// a JobId, Submit a SubmitSpec, Output an OutputParams.
using RequestParams = std::variant<std::monostate, UserRef, JobId, SubmitSpec, OutputParams>;

struct JobRequest {
  std::string principal;
  RequestKind kind = RequestKind::Status;
  RequestParams params;
};

struct GatewayConfig {
  int threshold = 10;
  Seconds window{10};
  Seconds backoff_base{1};
  Seconds backoff_cap{64};
  Seconds cache_ttl{60};
  /// Per-principal thresholds that replace `threshold`.
  std::map<std::string, int> threshold_overrides;
};

struct ThrottleState {
  std::string principal;
  std::deque<Timestamp> admitted;  // admit times inside the current window
  int consecutive_violations = 0;
  std::optional<Timestamp> blocked_until;
  std::optional<Timestamp> last_request;
};

struct CacheKey {
  std::string principal;
  RequestKind kind = RequestKind::Status;
  std::string digest;

  auto operator<=>(const CacheKey&) const = default;
};

struct CacheEntry {
  std::string payload;  // raw scheduler output of the last successful dispatch
  Timestamp stored_at{};
};

struct AdmitDecision {
  enum class Kind { Admit, ServeFromCache, Reject };
  Kind kind = Kind::Admit;
  std::optional<CacheEntry> entry;  // ServeFromCache
  Seconds retry_after{0};           // Reject
};

struct GatewayResponse {
  RequestKind kind = RequestKind::Status;
  std::string payload;
  bool from_cache = false;
  Timestamp stored_at{};
  std::vector<JobSummary> listing;                            // Status
  std::optional<JobDetail> detail;                            // StatusDetail
  std::optional<AccountingRecord> accounting;                 // Accounting
  std::optional<JobId> submitted_id;                          // Submit
  std::map<std::string, std::vector<std::string>> files;     // Output
  std::vector<JobId> inserted_ids;  // store records this dispatch created
};

struct PrincipalMetrics {
  std::uint64_t admits = 0;
  std::uint64_t cache_serves = 0;
  std::uint64_t rejects = 0;
};

/// Maps a principal to the credential its commands run with.
using CredentialResolver = std::function<CredentialHandle(std::string_view principal)>;

/// Single entry point for job requests: per-principal sliding-window rate
/// limiting with exponential backoff, a response cache for read-only kinds,
/// and dispatch through the adapter and connection manager into the store.
class Gateway {
 public:
  Gateway(const SchedulerAdapter& adapter, ConnectionManager& connections, JobStore& store,
          CredentialResolver resolver, GatewayConfig config = {}, Clock clock = system_now);

  /// Total decision function; updates the principal's throttle state.
  AdmitDecision admit(const JobRequest& request, Timestamp now);
  /// Runs an admitted request. Failures carry the stage they came from.
  GatewayResponse dispatch(const JobRequest& request);
  /// admit + dispatch or cache serve. Throws Throttled with retry_after on reject.
  GatewayResponse handle(const JobRequest& request);

  std::optional<CacheEntry> cache_lookup(const CacheKey& key, Timestamp now) const;
  static CacheKey cache_key(const JobRequest& request);
  static bool cacheable(RequestKind kind);

  ThrottleState throttle_state(const std::string& principal) const;
  std::map<std::string, PrincipalMetrics> metrics() const;
  const GatewayConfig& config() const { return config_; }
  const SchedulerAdapter& adapter() const { return adapter_; }
  JobStore& store() { return store_; }

 private:
  int threshold_for(const std::string& principal) const;
  GatewayResponse interpret(const JobRequest& request, std::string payload) const;
  void apply_to_store(const JobRequest& request, GatewayResponse& response);

  const SchedulerAdapter& adapter_;
  ConnectionManager& connections_;
  JobStore& store_;
  CredentialResolver resolver_;
  GatewayConfig config_;
  Clock clock_;

  mutable std::mutex limiter_mu_;
  std::map<std::string, ThrottleState> throttle_;
  std::map<std::string, PrincipalMetrics> metrics_;

  mutable std::shared_mutex cache_mu_;
  std::map<CacheKey, CacheEntry> cache_;
};

/// Throws InvalidParams when the params do not fit the kind.
void validate_request(const JobRequest& request);

/// Store record after folding in one listing row. `existing` may be empty.
JobRecord merge_summary(const std::optional<JobRecord>& existing, const JobSummary& row);
/// Store record after folding in a detail stanza.
JobRecord merge_detail(const std::optional<JobRecord>& existing, const JobDetail& detail);

}  // namespace clusterscope
