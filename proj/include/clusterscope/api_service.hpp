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
#include <optional>
#include <string>
#include <vector>

#include "clusterscope/analytics.hpp"
#include "clusterscope/auth.hpp"
#include "clusterscope/gateway.hpp"
#include "clusterscope/status_scheduler.hpp"

namespace clusterscope {

enum class Severity { Warning, Error };

std::string_view to_string(Severity severity);

struct LogFinding {
  Severity severity = Severity::Warning;
  std::size_t line = 0;  // 1-based
  std::string text;

  bool operator==(const LogFinding&) const = default;
};

struct JobDetailView {
  JobRecord record;
  std::string script_content;
  std::vector<std::string> output_tail;
  std::vector<LogFinding> log_findings;
};

struct SubmitResult {
  JobId job_id = 0;
  JobRecord record;
};

struct ApiConfig {
  int default_tail_lines = 20;
  int max_tail_lines = 10'000;
  /// Served at "/" when nonempty (the browser client build).
  std::string static_dir;
};

/// Lines mentioning "error" (Error) or "warning"/"warn" (Warning) as whole
/// words, any case, in file order. A line with both counts as Error.
std::vector<LogFinding> find_log_issues(const std::vector<std::string>& lines);

/// HTTP/JSON facade. Every handler runs through the gateway; all routes
/// except POST /auth/login require "Authorization: Bearer <token>".
class ApiService {
 public:
  ApiService(Gateway& gateway, JobStore& store, StatusScheduler* scheduler,
             Authenticator& auth, SessionStore& sessions, std::optional<TagRules> rules = {},
             ApiConfig config = {});
  ~ApiService();

  Session login(std::string_view provider, const LoginCredentials& credentials);
  std::vector<JobRecord> list_jobs(const Session& session, const std::optional<std::string>& user,
                                   const std::optional<JobStatus>& status, bool refresh);
  /// Throws NotFound or Forbidden.
  JobRecord visible_job(const Session& session, JobId id) const;
  /// At most two Output requests: script and error log in full, then the output tail.
  JobDetailView compose_job_detail(JobId id, int tail_lines, const Session& session);
  std::vector<std::string> output_tail(JobId id, int lines, const Session& session);
  std::vector<LogFinding> log_findings(JobId id, const Session& session);
  /// Validates before any cluster traffic.
  SubmitResult submit_job(const SubmitSpec& spec, const Session& session);
  JobRecord cancel_job(JobId id, const Session& session);
  Estimate predict(const std::string& tool, double reads, Metric metric) const;

  /// Binds and serves on a background thread. Returns the bound port.
  int start(const std::string& host, int port);
  void stop();

 private:
  struct Server;
  void check_tail(int lines) const;

  Gateway& gateway_;
  JobStore& store_;
  StatusScheduler* scheduler_;
  Authenticator& auth_;
  SessionStore& sessions_;
  std::optional<TagRules> rules_;
  ApiConfig config_;
  std::unique_ptr<Server> server_;
};

}  // namespace clusterscope
