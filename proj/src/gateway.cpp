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

#include "clusterscope/gateway.hpp"

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <algorithm>

#include "clusterscope/error.hpp"
#include "clusterscope/transport.hpp"

namespace clusterscope {

namespace {

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kDigits[md[i] >> 4];
    out += kDigits[md[i] & 15];
  }
  return out;
}

std::string canonical_params(const RequestParams& params) {
  struct Visitor {
    std::string operator()(std::monostate) const { return "all"; }
    std::string operator()(const UserRef& u) const { return "user\x1f" + u.name; }
    std::string operator()(JobId id) const { return "job\x1f" + std::to_string(id); }
    std::string operator()(const SubmitSpec& s) const { return "submit\x1f" + s.job_name; }
    std::string operator()(const OutputParams& o) const {
      std::string out = "output\x1f" + std::to_string(o.job_id) + "\x1f" +
                        (o.lines ? std::to_string(*o.lines) : "all");
      for (const auto& p : o.paths) out += "\x1f" + p;
      return out;
    }
  };
  return std::visit(Visitor{}, params);
}

std::string first_line(std::string_view text) {
  auto t = text.substr(0, text.find('\n'));
  return std::string(t.empty() ? "no output" : t);
}

std::string node_of(std::string_view queue) {
  auto at = queue.find('@');
  return std::string(at == std::string_view::npos ? queue : queue.substr(at + 1));
}

Seconds backoff(const GatewayConfig& c, int k) {
  // base * 2^(k-1), capped; stop doubling once past the cap to avoid overflow
  Seconds d = c.backoff_base;
  for (int i = 1; i < k && d < c.backoff_cap; ++i) d *= 2;
  return std::min(d, c.backoff_cap);
}

template <class T>
const T& param(const JobRequest& r) {
  return std::get<T>(r.params);
}

}  // namespace

std::string_view to_string(RequestKind kind) {
  switch (kind) {
    case RequestKind::Status: return "Status";
    case RequestKind::StatusDetail: return "StatusDetail";
    case RequestKind::Cancel: return "Cancel";
    case RequestKind::Submit: return "Submit";
    case RequestKind::Output: return "Output";
    case RequestKind::Accounting: return "Accounting";
  }
  return "?";
}

void validate_request(const JobRequest& r) {
  auto bad = [&](const std::string& why) {
    return Error(Errc::InvalidParams, std::string(to_string(r.kind)) + ": " + why, Stage::Render);
  };
  if (r.principal.empty()) throw bad("empty principal");
  switch (r.kind) {
    case RequestKind::Status:
      if (!std::holds_alternative<std::monostate>(r.params) &&
          !std::holds_alternative<UserRef>(r.params))
        throw bad("expects no parameter or a user");
      if (auto* u = std::get_if<UserRef>(&r.params); u && u->name.empty()) throw bad("empty user");
      return;
    case RequestKind::StatusDetail:
    case RequestKind::Cancel:
    case RequestKind::Accounting:
      if (!std::holds_alternative<JobId>(r.params) || std::get<JobId>(r.params) <= 0)
        throw bad("expects a job id");
      return;
    case RequestKind::Submit:
      if (!std::holds_alternative<SubmitSpec>(r.params)) throw bad("expects a submit spec");
      return;
    case RequestKind::Output: {
      auto* o = std::get_if<OutputParams>(&r.params);
      if (!o || o->paths.empty()) throw bad("expects file paths");
      return;
    }
  }
}

JobRecord merge_summary(const std::optional<JobRecord>& existing, const JobSummary& row) {
  JobRecord r = existing.value_or(JobRecord{});
  r.job_id = row.job_id;
  r.job_name = row.job_name;
  r.user = row.user;
  r.status = row.status;
  if (row.slots >= 1) r.cores = row.slots;
  if (!row.queue_or_node.empty()) r.cluster_node = node_of(row.queue_or_node);
  return r;
}

JobRecord merge_detail(const std::optional<JobRecord>& existing, const JobDetail& d) {
  JobRecord r = existing.value_or(JobRecord{});
  r.job_id = d.job_id;
  r.job_name = d.job_name;
  r.user = d.owner;
  r.path = d.script_path;
  r.command = d.submit_command;
  r.source_directory = d.source_directory;
  r.outpath = d.output_path;
  r.memory_requested = d.memory_requested;
  r.parallel = d.parallel;
  r.cores = d.cores;
  r.run_time = format_duration(d.run_time);
  r.time_remaining = d.time_remaining ? format_duration(*d.time_remaining) : std::string{};
  r.current_memory = d.current_memory;
  r.maximum_memory = std::max(r.maximum_memory, d.maximum_memory);
  return r;
}

Gateway::Gateway(const SchedulerAdapter& adapter, ConnectionManager& connections, JobStore& store,
                 CredentialResolver resolver, GatewayConfig config, Clock clock)
    : adapter_(adapter),
      connections_(connections),
      store_(store),
      resolver_(std::move(resolver)),
      config_(std::move(config)),
      clock_(std::move(clock)) {
  if (config_.threshold < 1 || config_.window < Seconds{1} || config_.backoff_base < Seconds{1} ||
      config_.backoff_cap < config_.backoff_base || config_.cache_ttl < Seconds{0})
    throw Error(Errc::InvalidParams, "invalid limiter or cache configuration");
  for (const auto& [p, t] : config_.threshold_overrides)
    if (t < 1) throw Error(Errc::InvalidParams, "threshold for " + p + " must be positive");
}

bool Gateway::cacheable(RequestKind kind) {
  return kind == RequestKind::Status || kind == RequestKind::StatusDetail ||
         kind == RequestKind::Output;
}

CacheKey Gateway::cache_key(const JobRequest& request) {
  return CacheKey{request.principal, request.kind,
                  sha256_hex(std::string(to_string(request.kind)) + "\x1e" +
                             canonical_params(request.params))};
}

int Gateway::threshold_for(const std::string& principal) const {
  auto it = config_.threshold_overrides.find(principal);
  return it == config_.threshold_overrides.end() ? config_.threshold : it->second;
}

AdmitDecision Gateway::admit(const JobRequest& request, Timestamp now) {
  std::lock_guard lock(limiter_mu_);
  auto& st = throttle_[request.principal];
  st.principal = request.principal;
  auto& m = metrics_[request.principal];

  while (!st.admitted.empty() && st.admitted.front() <= now - config_.window) st.admitted.pop_front();
  if (st.last_request && now - *st.last_request >= config_.window) {
    st.consecutive_violations = 0;
    st.blocked_until.reset();
  }
  st.last_request = now;

  const bool blocked = st.blocked_until && now < *st.blocked_until;
  if (!blocked && static_cast<int>(st.admitted.size()) < threshold_for(request.principal)) {
    st.admitted.push_back(now);
    ++m.admits;
    return {AdmitDecision::Kind::Admit, std::nullopt, Seconds{0}};
  }

  ++st.consecutive_violations;
  st.blocked_until = now + backoff(config_, st.consecutive_violations);
  if (cacheable(request.kind)) {
    if (auto entry = cache_lookup(cache_key(request), now)) {
      ++m.cache_serves;
      return {AdmitDecision::Kind::ServeFromCache, std::move(entry), Seconds{0}};
    }
  }
  ++m.rejects;
  return {AdmitDecision::Kind::Reject, std::nullopt, *st.blocked_until - now};
}

std::optional<CacheEntry> Gateway::cache_lookup(const CacheKey& key, Timestamp now) const {
  std::shared_lock lock(cache_mu_);
  auto it = cache_.find(key);
  if (it == cache_.end() || now - it->second.stored_at > config_.cache_ttl) return std::nullopt;
  return it->second;
}

GatewayResponse Gateway::handle(const JobRequest& request) {
  validate_request(request);
  auto decision = admit(request, clock_());
  switch (decision.kind) {
    case AdmitDecision::Kind::Admit: return dispatch(request);
    case AdmitDecision::Kind::ServeFromCache: {
      auto response = interpret(request, decision.entry->payload);
      response.from_cache = true;
      response.stored_at = decision.entry->stored_at;
      return response;
    }
    case AdmitDecision::Kind::Reject: break;
  }
  throw Error(Errc::Throttled,
              "too many requests from " + request.principal + "; retry in " +
                  std::to_string(decision.retry_after.count()) + "s")
      .with_retry_after(decision.retry_after);
}

GatewayResponse Gateway::interpret(const JobRequest& request, std::string payload) const {
  GatewayResponse out;
  out.kind = request.kind;
  try {
    switch (request.kind) {
      case RequestKind::Status: out.listing = adapter_.parse_job_list(payload); break;
      case RequestKind::StatusDetail: out.detail = adapter_.parse_job_detail(payload); break;
      case RequestKind::Accounting: out.accounting = adapter_.parse_accounting(payload); break;
      case RequestKind::Submit: out.submitted_id = adapter_.parse_submit(payload); break;
      case RequestKind::Output:
        out.files = split_fetch_output(payload, param<OutputParams>(request).paths);
        break;
      case RequestKind::Cancel: break;
    }
  } catch (Error& e) {
    e.in_stage(Stage::Parse);
    throw;
  }
  out.payload = std::move(payload);
  return out;
}

GatewayResponse Gateway::dispatch(const JobRequest& request) {
  validate_request(request);

  CommandLine argv;
  try {
    switch (request.kind) {
      case RequestKind::Status:
        argv = std::holds_alternative<UserRef>(request.params)
                   ? adapter_.render_command(CommandKind::ListForUser, param<UserRef>(request))
                   : adapter_.render_command(CommandKind::List, std::monostate{});
        break;
      case RequestKind::StatusDetail:
        argv = adapter_.render_command(CommandKind::Detail, param<JobId>(request));
        break;
      case RequestKind::Cancel:
        argv = adapter_.render_command(CommandKind::Cancel, param<JobId>(request));
        break;
      case RequestKind::Accounting:
        argv = adapter_.render_command(CommandKind::Accounting, param<JobId>(request));
        break;
      case RequestKind::Submit:
        argv = adapter_.render_command(CommandKind::Submit, param<SubmitSpec>(request));
        break;
      case RequestKind::Output: {
        const auto& o = param<OutputParams>(request);
        argv = render_fetch(o.paths, o.lines);
        break;
      }
    }
  } catch (Error& e) {
    e.in_stage(Stage::Render);
    throw;
  }

  ExecResult result;
  try {
    result = connections_.execute(resolver_(request.principal), argv);
  } catch (Error& e) {
    e.in_stage(Stage::Transport);
    throw;
  }

  std::string payload = result.stdout_text;
  if (result.exit_code != 0) {
    if (request.kind == RequestKind::Accounting &&
        result.stderr_text.find("not found") != std::string::npos) {
      payload = result.stderr_text;  // parser turns this into NotFinished
    } else if (request.kind == RequestKind::Output &&
               result.stderr_text.find("cannot open") != std::string::npos) {
      // some files missing; the rest is still usable
    } else {
      throw Error(Errc::TransportError,
                  argv.front() + " exited with status " + std::to_string(result.exit_code) + ": " +
                      first_line(result.stderr_text),
                  Stage::Transport);
    }
  }

  auto response = interpret(request, payload);
  if (request.kind == RequestKind::Submit) {
    // the id the cluster printed is what the caller needs
    response.payload = std::to_string(*response.submitted_id);
  }
  try {
    apply_to_store(request, response);
  } catch (Error& e) {
    e.in_stage(Stage::Store);
    throw;
  }

  response.stored_at = clock_();
  if (cacheable(request.kind) && result.exit_code == 0) {
    std::unique_lock lock(cache_mu_);
    cache_[cache_key(request)] = CacheEntry{payload, response.stored_at};
  }
  return response;
}

void Gateway::apply_to_store(const JobRequest& request, GatewayResponse& response) {
  switch (request.kind) {
    case RequestKind::Status:
      for (const auto& row : response.listing) {
        auto existing = store_.find_job(row.job_id);
        if (existing && existing->finalized()) continue;
        auto merged = merge_summary(existing, row);
        if (!existing || merged != *existing) store_.upsert_job(merged);
        if (!existing) response.inserted_ids.push_back(row.job_id);
      }
      break;
    case RequestKind::StatusDetail: {
      const auto& d = *response.detail;
      auto existing = store_.find_job(d.job_id);
      if (existing && existing->finalized()) break;
      auto merged = merge_detail(existing, d);
      if (!existing || merged != *existing) store_.upsert_job(merged);
      if (!existing) response.inserted_ids.push_back(d.job_id);
      if (!d.error_path.empty() && store_.error_path(d.job_id) != d.error_path)
        store_.set_error_path(d.job_id, d.error_path);
      break;
    }
    case RequestKind::Cancel: {
      auto existing = store_.find_job(param<JobId>(request));
      if (existing && !existing->finalized()) {
        existing->status = JobStatus::Deleted;  // pending until accounting confirms
        store_.upsert_job(*existing);
      }
      break;
    }
    case RequestKind::Submit: {
      const auto& spec = param<SubmitSpec>(request);
      JobRecord r;
      r.job_id = *response.submitted_id;
      r.job_name = spec.job_name;
      r.user = request.principal;
      r.status = JobStatus::Queued;
      r.path = spec.script_path;
      r.command = shell_join(adapter_.render_command(CommandKind::Submit, spec));
      r.source_directory = spec.source_directory;
      r.outpath = spec.output_path.value_or("");
      r.memory_requested = spec.memory_requested;
      r.parallel = spec.parallel;
      r.cores = spec.cores;
      store_.upsert_job(r);
      response.inserted_ids.push_back(r.job_id);
      spdlog::info("{} submitted job {}", request.principal, r.job_id);
      break;
    }
    case RequestKind::Output:
    case RequestKind::Accounting: break;
  }
}

ThrottleState Gateway::throttle_state(const std::string& principal) const {
  std::lock_guard lock(limiter_mu_);
  auto it = throttle_.find(principal);
  if (it == throttle_.end()) return ThrottleState{principal, {}, 0, std::nullopt, std::nullopt};
  return it->second;
}

std::map<std::string, PrincipalMetrics> Gateway::metrics() const {
  std::lock_guard lock(limiter_mu_);
  return metrics_;
}

}  // namespace clusterscope
