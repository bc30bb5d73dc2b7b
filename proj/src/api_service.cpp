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

#include "clusterscope/api_service.hpp"

#include <boost/regex.hpp>
#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <charconv>
#include <thread>

#include "clusterscope/error.hpp"

namespace clusterscope {

using nlohmann::json;

namespace {

json record_json(const JobRecord& r) {
  return json{{"jobId", r.job_id},
              {"jobName", r.job_name},
              {"user", r.user},
              {"status", to_string(r.status)},
              {"path", r.path},
              {"command", r.command},
              {"sourceDirectory", r.source_directory},
              {"outpath", r.outpath},
              {"memoryRequested", r.memory_requested},
              {"parallel", r.parallel ? 1 : 0},
              {"cores", r.cores},
              {"timeAdded", r.time_added},
              {"runTime", r.run_time},
              {"timeRemaining", r.time_remaining},
              {"currentMemory", r.current_memory},
              {"maximumMemory", r.maximum_memory},
              {"clusterNode", r.cluster_node},
              {"finalRunTime", r.final_run_time},
              {"finalStatus", r.final_status}};
}

json findings_json(const std::vector<LogFinding>& findings) {
  json out = json::array();
  for (const auto& f : findings)
    out.push_back({{"severity", to_string(f.severity)}, {"line", f.line}, {"text", f.text}});
  return out;
}

json report_json(const PollReport& r) {
  json errors = json::array();
  for (const auto& e : r.errors) {
    json j{{"code", to_string(e.code)}, {"stage", to_string(e.stage)}, {"message", e.message}};
    if (e.job_id) j["jobId"] = *e.job_id;
    errors.push_back(j);
  }
  return json{{"at", format_iso8601(r.at)},
              {"listedJobs", r.listed_jobs},
              {"detailQueriesIssued", r.detail_queries_issued},
              {"newJobs", r.new_jobs},
              {"finalizedJobs", r.finalized_jobs},
              {"deferredJobs", r.deferred_ids},
              {"errors", errors}};
}

int http_status(const Error& e) {
  switch (e.code()) {
    case Errc::InvalidParams:
    case Errc::UnitError:
    case Errc::UnsupportedKind:
    case Errc::InsufficientData:
    case Errc::DegenerateCovariate:
      return 400;
    case Errc::Unauthenticated:
    case Errc::AuthFailure:
      return e.stage() == Stage::Transport ? 502 : 401;
    case Errc::Forbidden: return 403;
    case Errc::NotFound:
    case Errc::FileNotFound:
    case Errc::UnfittedModel:
      return 404;
    case Errc::Throttled: return 429;
    case Errc::ProviderUnavailable: return 503;
    default: break;
  }
  if (e.stage() == Stage::Transport || e.stage() == Stage::Parse) return 502;
  return 500;
}

std::optional<SubmitSpec> spec_from_json(const json& j) {
  SubmitSpec s;
  s.job_name = j.at("jobName").get<std::string>();
  s.script_path = j.at("scriptPath").get<std::string>();
  s.source_directory = j.at("sourceDirectory").get<std::string>();
  if (j.contains("memoryRequested")) s.memory_requested = j.at("memoryRequested").get<std::string>();
  if (j.contains("cores")) s.cores = j.at("cores").get<int>();
  if (j.contains("parallel")) {
    const auto& p = j.at("parallel");
    s.parallel = p.is_boolean() ? p.get<bool>() : p.get<int>() != 0;
  }
  if (j.contains("outputPath") && !j.at("outputPath").is_null())
    s.output_path = j.at("outputPath").get<std::string>();
  if (j.contains("extraArgs")) s.extra_args = j.at("extraArgs").get<std::vector<std::string>>();
  return s;
}

int int_param(const httplib::Request& req, const char* name, int fallback) {
  if (!req.has_param(name)) return fallback;
  auto v = req.get_param_value(name);
  int out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw Error(Errc::InvalidParams, std::string(name) + " must be an integer");
  return out;
}

JobId path_id(const httplib::Request& req) {
  const std::string& text = req.matches[1].str();
  JobId id = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), id);
  if (ec != std::errc{} || id <= 0) throw Error(Errc::InvalidParams, "bad job id");
  return id;
}

std::string resolve(const std::string& dir, const std::string& path) {
  if (path.empty() || path.front() == '/' || dir.empty()) return path;
  return dir.back() == '/' ? dir + path : dir + "/" + path;
}

}  // namespace

std::string_view to_string(Severity severity) {
  return severity == Severity::Error ? "Error" : "Warning";
}

std::vector<LogFinding> find_log_issues(const std::vector<std::string>& lines) {
  static const boost::regex kError(R"(\berror\b)", boost::regex::perl | boost::regex::icase);
  static const boost::regex kWarning(R"(\bwarn(ing)?\b)", boost::regex::perl | boost::regex::icase);
  std::vector<LogFinding> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (boost::regex_search(lines[i], kError))
      out.push_back({Severity::Error, i + 1, lines[i]});
    else if (boost::regex_search(lines[i], kWarning))
      out.push_back({Severity::Warning, i + 1, lines[i]});
  }
  return out;
}

struct ApiService::Server {
  httplib::Server http;
  std::thread thread;
};

ApiService::ApiService(Gateway& gateway, JobStore& store, StatusScheduler* scheduler,
                       Authenticator& auth, SessionStore& sessions, std::optional<TagRules> rules,
                       ApiConfig config)
    : gateway_(gateway),
      store_(store),
      scheduler_(scheduler),
      auth_(auth),
      sessions_(sessions),
      rules_(std::move(rules)),
      config_(std::move(config)) {}

ApiService::~ApiService() { stop(); }

Session ApiService::login(std::string_view provider, const LoginCredentials& credentials) {
  auto identity = auth_.authenticate(provider, credentials);
  auto s = sessions_.issue(identity);
  spdlog::info("login {} via {}", s.principal, provider);
  return s;
}

void ApiService::check_tail(int lines) const {
  if (lines < 1 || lines > config_.max_tail_lines)
    throw Error(Errc::InvalidParams,
                "lines must be between 1 and " + std::to_string(config_.max_tail_lines));
}

std::vector<JobRecord> ApiService::list_jobs(const Session& session,
                                             const std::optional<std::string>& user,
                                             const std::optional<JobStatus>& status, bool refresh) {
  HistoryQuery q;
  if (session.admin) {
    q.user = user;
    q.allow_all = true;
  } else {
    if (user && *user != session.principal)
      throw Error(Errc::Forbidden, "cannot list jobs of other users");
    q.user = session.principal;
  }
  if (status) q.status_in = std::set<JobStatus>{*status};
  if (refresh && scheduler_) {
    auto report = scheduler_->refresh_user(q.user.value_or(session.principal), system_now());
    for (const auto& e : report.errors) {
      if (e.code == Errc::Throttled)
        throw Error(Errc::Throttled, e.message).with_retry_after(Seconds{1});
    }
  }
  return store_.list_jobs(q);
}

JobRecord ApiService::visible_job(const Session& session, JobId id) const {
  auto rec = store_.get_job(id);
  if (!session.admin && rec.user != session.principal)
    throw Error(Errc::Forbidden, "job " + std::to_string(id) + " belongs to another user");
  return rec;
}

JobDetailView ApiService::compose_job_detail(JobId id, int tail_lines, const Session& session) {
  check_tail(tail_lines);
  JobDetailView view;
  view.record = visible_job(session, id);
  const auto& rec = view.record;

  std::string script = resolve(rec.source_directory, rec.path);
  auto err = store_.error_path(id);
  std::vector<std::string> full;
  if (!script.empty()) full.push_back(script);
  if (err && !err->empty() && *err != script) full.push_back(*err);
  if (!full.empty()) {
    auto r = gateway_.handle({session.principal, RequestKind::Output, OutputParams{id, full, {}}});
    if (auto it = r.files.find(script); !script.empty() && it != r.files.end()) {
      for (const auto& line : it->second) view.script_content += line + "\n";
    }
    if (err) {
      if (auto it = r.files.find(*err); it != r.files.end())
        view.log_findings = find_log_issues(it->second);
    }
  }
  if (!rec.outpath.empty()) {
    std::vector<std::string> out{rec.outpath};
    auto r = gateway_.handle(
        {session.principal, RequestKind::Output, OutputParams{id, out, tail_lines}});
    if (auto it = r.files.find(rec.outpath); it != r.files.end()) view.output_tail = it->second;
  }
  return view;
}

std::vector<std::string> ApiService::output_tail(JobId id, int lines, const Session& session) {
  check_tail(lines);
  auto rec = visible_job(session, id);
  if (rec.outpath.empty()) throw Error(Errc::NotFound, "output path of job not known yet");
  std::vector<std::string> paths{rec.outpath};
  auto r = gateway_.handle({session.principal, RequestKind::Output, OutputParams{id, paths, lines}});
  auto it = r.files.find(rec.outpath);
  if (it == r.files.end()) throw Error(Errc::FileNotFound, rec.outpath + " is not readable");
  return it->second;
}

std::vector<LogFinding> ApiService::log_findings(JobId id, const Session& session) {
  visible_job(session, id);
  auto err = store_.error_path(id);
  if (!err || err->empty()) throw Error(Errc::NotFound, "error log path of job not known yet");
  std::vector<std::string> paths{*err};
  auto r = gateway_.handle({session.principal, RequestKind::Output, OutputParams{id, paths, {}}});
  auto it = r.files.find(*err);
  if (it == r.files.end()) throw Error(Errc::FileNotFound, *err + " is not readable");
  return find_log_issues(it->second);
}

SubmitResult ApiService::submit_job(const SubmitSpec& spec, const Session& session) {
  try {
    validate_submit_spec(spec);
  } catch (Error& e) {
    e.in_stage(Stage::Render);
    throw;
  }
  auto r = gateway_.handle({session.principal, RequestKind::Submit, spec});
  JobId id = *r.submitted_id;
  return SubmitResult{id, store_.get_job(id)};
}

JobRecord ApiService::cancel_job(JobId id, const Session& session) {
  visible_job(session, id);
  gateway_.handle({session.principal, RequestKind::Cancel, id});
  return store_.get_job(id);
}

Estimate ApiService::predict(const std::string& tool, double reads, Metric metric) const {
  if (!rules_) throw Error(Errc::NotFound, "no tag rules configured");
  auto built = build_models(store_, *rules_, {"tool"}, "reads");
  for (const auto& m : built.models) {
    auto it = m.tag_filter.find("tool");
    if (m.metric == metric && it != m.tag_filter.end() && it->second == tool)
      return clusterscope::predict(m, reads);
  }
  throw Error(Errc::UnfittedModel, "no model for tool " + tool);
}

int ApiService::start(const std::string& host, int port) {
  if (server_) throw Error(Errc::InvalidParams, "server already running");
  server_ = std::make_unique<Server>();
  auto& http = server_->http;

  auto send_error = [](httplib::Response& res, const Error& e) {
    res.status = http_status(e);
    json body{{"stage", to_string(e.stage())}, {"code", to_string(e.code())}, {"message", e.what()}};
    if (e.retry_after()) {
      body["retryAfter"] = e.retry_after()->count();
      res.set_header("Retry-After", std::to_string(e.retry_after()->count()));
    }
    res.set_content(body.dump(), "application/json");
  };
  auto session_of = [this](const httplib::Request& req) {
    auto h = req.get_header_value("Authorization");
    constexpr std::string_view kBearer = "Bearer ";
    if (!std::string_view(h).starts_with(kBearer))
      throw Error(Errc::Unauthenticated, "missing bearer token");
    return sessions_.validate(std::string_view(h).substr(kBearer.size()));
  };
  // Wraps a handler with error mapping; `authed` handlers get the session.
  auto wrap = [send_error, session_of](auto fn, bool authed = true) {
    return [=](const httplib::Request& req, httplib::Response& res) {
      try {
        json out;
        if (authed) {
          out = fn(req, session_of(req));
        } else {
          out = fn(req, Session{});
        }
        res.set_content(out.dump(), "application/json");
      } catch (const Error& e) {
        send_error(res, e);
      } catch (const json::exception& e) {
        send_error(res, Error(Errc::InvalidParams, std::string("bad request body: ") + e.what()));
      } catch (const std::exception& e) {
        spdlog::error("request {} {} failed: {}", req.method, req.path, e.what());
        send_error(res, Error(Errc::StorageError, "internal error"));
      }
    };
  };

  // Every API path needs a session, including ones no route matches.
  http.set_pre_routing_handler([send_error, session_of](const httplib::Request& req,
                                                        httplib::Response& res) {
    bool api = req.path.starts_with("/jobs") || req.path.starts_with("/predict") ||
               req.path.starts_with("/diagnostics") || req.path.starts_with("/auth/");
    if (!api || req.path == "/auth/login") return httplib::Server::HandlerResponse::Unhandled;
    try {
      session_of(req);
    } catch (const Error& e) {
      send_error(res, e);
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });

  http.Post("/auth/login", wrap(
                               [this](const httplib::Request& req, const Session&) {
                                 auto body = json::parse(req.body);
                                 LoginCredentials c;
                                 c.user = body.value("user", "");
                                 c.token = body.value("token", "");
                                 c.assertion = body.value("assertion", "");
                                 auto s = login(body.value("provider", "local"), c);
                                 return json{{"token", s.token},
                                             {"principal", s.principal},
                                             {"admin", s.admin},
                                             {"issuedAt", format_iso8601(s.issued_at)},
                                             {"expiresAt", format_iso8601(s.expires_at)}};
                               },
                               false));

  http.Get("/jobs", wrap([this](const httplib::Request& req, const Session& s) {
    std::optional<std::string> user;
    if (req.has_param("user")) user = req.get_param_value("user");
    std::optional<JobStatus> status;
    if (req.has_param("status")) {
      auto name = req.get_param_value("status");
      for (int c = 0; c <= static_cast<int>(JobStatus::Unknown); ++c) {
        auto st = *status_from_code(c);
        if (to_string(st) == name) status = st;
      }
      if (!status) throw Error(Errc::InvalidParams, "unknown status " + name);
    }
    bool refresh = req.has_param("refresh") && req.get_param_value("refresh") != "0";
    json out = json::array();
    for (const auto& r : list_jobs(s, user, status, refresh)) out.push_back(record_json(r));
    return out;
  }));

  http.Get(R"(/jobs/(\d+))", wrap([this](const httplib::Request& req, const Session& s) {
    auto view = compose_job_detail(path_id(req), int_param(req, "lines", config_.default_tail_lines), s);
    return json{{"record", record_json(view.record)},
                {"scriptContent", view.script_content},
                {"outputTail", view.output_tail},
                {"logFindings", findings_json(view.log_findings)}};
  }));

  http.Get(R"(/jobs/(\d+)/output)", wrap([this](const httplib::Request& req, const Session& s) {
    return json{{"lines", output_tail(path_id(req), int_param(req, "lines", config_.default_tail_lines), s)}};
  }));

  http.Get(R"(/jobs/(\d+)/logs)", wrap([this](const httplib::Request& req, const Session& s) {
    return json{{"logFindings", findings_json(log_findings(path_id(req), s))}};
  }));

  http.Post("/jobs", wrap([this](const httplib::Request& req, const Session& s) {
    auto spec = spec_from_json(json::parse(req.body));
    auto result = submit_job(*spec, s);
    return json{{"jobId", result.job_id}, {"record", record_json(result.record)}};
  }));

  http.Delete(R"(/jobs/(\d+))", wrap([this](const httplib::Request& req, const Session& s) {
    return json{{"record", record_json(cancel_job(path_id(req), s))}};
  }));

  http.Get("/predict", wrap([this](const httplib::Request& req, const Session&) {
    if (!req.has_param("tool") || !req.has_param("reads"))
      throw Error(Errc::InvalidParams, "tool and reads are required");
    auto reads = parse_scaled_number(req.get_param_value("reads"));
    if (!reads) throw Error(Errc::InvalidParams, "reads must be a number");
    auto metric = metric_from_string(req.has_param("metric") ? req.get_param_value("metric")
                                                             : "ElapsedSeconds");
    if (!metric) throw Error(Errc::InvalidParams, "unknown metric");
    auto est = predict(req.get_param_value("tool"), *reads, *metric);
    return json{{"value", est.value}, {"rmse", est.rmse}, {"metric", to_string(*metric)}};
  }));

  http.Get("/diagnostics", wrap([this](const httplib::Request&, const Session&) {
    json metrics = json::object();
    for (const auto& [p, m] : gateway_.metrics())
      metrics[p] = {{"admits", m.admits}, {"cacheServes", m.cache_serves}, {"rejects", m.rejects}};
    json out{{"gateway", metrics}, {"poll", nullptr}};
    if (scheduler_) {
      if (auto r = scheduler_->last_report()) out["poll"] = report_json(*r);
      out["pendingAccounting"] = scheduler_->pending_retries().size();
    }
    return out;
  }));

  if (!config_.static_dir.empty() && !http.set_mount_point("/", config_.static_dir))
    throw Error(Errc::InvalidParams, "static directory " + config_.static_dir + " does not exist");

  int bound = port == 0 ? http.bind_to_any_port(host) : (http.bind_to_port(host, port) ? port : -1);
  if (bound <= 0) {
    server_.reset();
    throw Error(Errc::ConnectFailure, "cannot bind " + host + ":" + std::to_string(port));
  }
  server_->thread = std::thread([this] { server_->http.listen_after_bind(); });
  spdlog::info("api listening on {}:{}", host, bound);
  return bound;
}

void ApiService::stop() {
  if (!server_) return;
  server_->http.stop();
  if (server_->thread.joinable()) server_->thread.join();
  server_.reset();
}

}  // namespace clusterscope
