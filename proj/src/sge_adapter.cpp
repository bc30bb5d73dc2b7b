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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <string>

#include "clusterscope/error.hpp"
#include "clusterscope/scheduler_adapter.hpp"
#include "clusterscope/sge_grammar.hpp"
#include "clusterscope/units.hpp"

namespace clusterscope {

namespace {

Error parse_error(const std::string& what, std::size_t line = 0) {
  Error e(Errc::ParseError, line ? "line " + std::to_string(line) + ": " + what : what);
  if (line) e.at_line(line);
  return e;
}

template <typename Int>
std::optional<Int> to_int(std::string_view text) {
  Int value{};
  if (text.empty()) return std::nullopt;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

bool starts_with_dash(std::string_view s) { return !s.empty() && s.front() == '-'; }

void require_text(std::string_view field, std::string_view value, bool allow_empty = false) {
  if (value.empty() && !allow_empty)
    throw Error(Errc::InvalidParams, std::string(field) + " must not be empty");
  if (has_control_chars(value))
    throw Error(Errc::InvalidParams, std::string(field) + " contains control characters");
  if (trim(value).size() != value.size())
    throw Error(Errc::InvalidParams, std::string(field) + " has surrounding whitespace");
  if (starts_with_dash(value))
    throw Error(Errc::InvalidParams, std::string(field) + " must not start with '-'");
}

JobId require_job_id(const CommandParams& params) {
  const auto* id = std::get_if<JobId>(&params);
  if (!id) throw Error(Errc::InvalidParams, "request needs a job id");
  if (*id <= 0) throw Error(Errc::InvalidParams, "job id must be positive");
  return *id;
}

std::map<std::string, std::string, std::less<>> read_colon_stanza(std::string_view raw) {
  std::map<std::string, std::string, std::less<>> kv;
  for (auto line : split_lines(raw)) {
    auto t = trim(line);
    if (t.empty() || t.front() == '=') continue;
    auto colon = t.find(':');
    if (colon == std::string_view::npos) continue;
    auto key = trim(t.substr(0, colon));
    auto value = trim(t.substr(colon + 1));
    // qstat prints "usage    1:" for array task 1; fold it to "usage".
    if (key.starts_with(sge::kUsage)) key = sge::kUsage;
    kv.emplace(std::string(key), std::string(value));
  }
  return kv;
}

std::uint64_t memory_or_zero(std::string_view token) {
  if (token.empty() || token == "N/A") return 0;
  return parse_memory(token);
}

}  // namespace

std::string_view to_string(CommandKind kind) {
  switch (kind) {
    case CommandKind::List: return "List";
    case CommandKind::ListForUser: return "ListForUser";
    case CommandKind::Detail: return "Detail";
    case CommandKind::Cancel: return "Cancel";
    case CommandKind::Submit: return "Submit";
    case CommandKind::Accounting: return "Accounting";
  }
  return "?";
}

JobStatus map_sge_status(std::string_view raw) {
  for (const auto& entry : sge::kStateTable) {
    if (entry.letters == raw) return entry.status;
  }
  // Canonical names map to themselves so the function is idempotent on its output.
  for (int code = 0; code <= static_cast<int>(JobStatus::Unknown); ++code) {
    auto status = static_cast<JobStatus>(code);
    if (to_string(status) == raw) return status;
  }
  return JobStatus::Unknown;
}

void validate_submit_spec(const SubmitSpec& spec) {
  if (spec.job_name.empty()) throw Error(Errc::InvalidParams, "jobName must not be empty");
  if (has_whitespace(spec.job_name))
    throw Error(Errc::InvalidParams, "jobName must not contain whitespace");
  require_text("jobName", spec.job_name);
  if (spec.job_name.find_first_of("/:@\\*?'\"") != std::string::npos)
    throw Error(Errc::InvalidParams, "jobName contains a character the scheduler rejects");
  require_text("scriptPath", spec.script_path);
  require_text("sourceDirectory", spec.source_directory);
  require_text("memoryRequested", spec.memory_requested);
  try {
    parse_memory(spec.memory_requested);
  } catch (const Error& e) {
    throw Error(Errc::InvalidParams, std::string("memoryRequested: ") + e.what());
  }
  if (spec.cores < 1) throw Error(Errc::InvalidParams, "cores must be at least 1");
  if (!spec.parallel && spec.cores != 1)
    throw Error(Errc::InvalidParams, "a non-parallel job runs on exactly one core");
  if (spec.output_path) require_text("outputPath", *spec.output_path);
  for (const auto& arg : spec.extra_args) {
    if (arg.empty() || has_control_chars(arg))
      throw Error(Errc::InvalidParams, "extraArgs entries must be nonempty printable text");
  }
}

CommandLine SgeAdapter::render_command(CommandKind kind, const CommandParams& params) const {
  switch (kind) {
    case CommandKind::List:
      if (!std::holds_alternative<std::monostate>(params))
        throw Error(Errc::InvalidParams, "List takes no parameters");
      return {std::string(sge::kQstat), "-u", std::string(sge::kAllUsers)};

    case CommandKind::ListForUser: {
      const auto* user = std::get_if<UserRef>(&params);
      if (!user) throw Error(Errc::InvalidParams, "ListForUser needs a user");
      require_text("user", user->name);
      if (has_whitespace(user->name))
        throw Error(Errc::InvalidParams, "user must not contain whitespace");
      return {std::string(sge::kQstat), "-u", user->name};
    }

    case CommandKind::Detail:
      return {std::string(sge::kQstat), "-j", std::to_string(require_job_id(params))};

    case CommandKind::Cancel:
      return {std::string(sge::kQdel), std::to_string(require_job_id(params))};

    case CommandKind::Accounting:
      return {std::string(sge::kQacct), "-j", std::to_string(require_job_id(params))};

    case CommandKind::Submit: {
      const auto* spec = std::get_if<SubmitSpec>(&params);
      if (!spec) throw Error(Errc::InvalidParams, "Submit needs a SubmitSpec");
      validate_submit_spec(*spec);
      CommandLine argv{std::string(sge::kQsub),
                       "-N",
                       spec->job_name,
                       "-wd",
                       spec->source_directory,
                       "-l",
                       std::string(sge::kVmemResource) + "=" + spec->memory_requested};
      if (spec->parallel) {
        argv.insert(argv.end(), {"-pe", "smp", std::to_string(spec->cores)});
      }
      if (spec->output_path) argv.insert(argv.end(), {"-o", *spec->output_path});
      argv.insert(argv.end(), spec->extra_args.begin(), spec->extra_args.end());
      argv.push_back(spec->script_path);
      return argv;
    }
  }
  throw Error(Errc::UnsupportedKind, "unknown command kind");
}

std::vector<JobSummary> SgeAdapter::parse_job_list(std::string_view raw) const {
  std::vector<JobSummary> jobs;
  std::set<JobId> seen;
  auto lines = split_lines(raw);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    auto line = trim(lines[i]);
    if (line.empty() || line.starts_with("job-ID")) continue;
    if (std::all_of(line.begin(), line.end(), [](char c) { return c == '-'; })) continue;

    auto tokens = split_ws(line);
    if (tokens.size() != 8 && tokens.size() != 9)
      throw parse_error("expected 8 or 9 columns, got " + std::to_string(tokens.size()), lineno);

    JobSummary job;
    auto id = to_int<JobId>(tokens[0]);
    if (!id || *id <= 0) throw parse_error("job id is not a positive integer", lineno);
    job.job_id = *id;
    double prior = 0;
    auto [pp, pec] = std::from_chars(tokens[1].data(), tokens[1].data() + tokens[1].size(), prior);
    if (pec != std::errc{} || pp != tokens[1].data() + tokens[1].size())
      throw parse_error("priority is not a number", lineno);
    job.job_name = tokens[2];
    job.user = tokens[3];
    job.status = map_status(tokens[4]);
    auto when = parse_sge_time(tokens[5], tokens[6]);
    if (!when) throw parse_error("bad submit/start timestamp", lineno);
    job.started_or_submitted_at = *when;
    std::string_view slots_token = tokens.back();
    if (tokens.size() == 9) job.queue_or_node = tokens[7];
    auto slots = to_int<int>(slots_token);
    if (!slots || *slots < 1) throw parse_error("slots is not a positive integer", lineno);
    job.slots = *slots;

    if (!seen.insert(job.job_id).second)
      throw parse_error("duplicate job id " + std::to_string(job.job_id), lineno);
    jobs.push_back(std::move(job));
  }
  return jobs;
}

JobDetail SgeAdapter::parse_job_detail(std::string_view raw) const {
  auto kv = read_colon_stanza(raw);
  auto get = [&](std::string_view key) -> std::string_view {
    auto it = kv.find(key);
    return it == kv.end() ? std::string_view{} : std::string_view{it->second};
  };

  JobDetail d;
  auto id = to_int<JobId>(get(sge::kJobNumber));
  if (!id || *id <= 0) throw parse_error("missing or invalid job_number");
  d.job_id = *id;
  d.job_name = get(sge::kJobName);
  d.owner = get(sge::kOwner);
  d.source_directory = get(sge::kWorkdir);
  d.submit_command = get(sge::kCmd);
  d.script_path = get(sge::kScriptFile);
  d.output_path = get(sge::kStdoutPath);
  d.error_path = get(sge::kStderrPath);

  {
    std::string_view resources = get(sge::kHardResources);
    std::size_t start = 0;
    while (!resources.empty()) {
      auto comma = resources.find(',', start);
      auto item = trim(resources.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                               : comma - start));
      auto eq = item.find('=');
      if (eq != std::string_view::npos && trim(item.substr(0, eq)) == sge::kVmemResource) {
        d.memory_requested = trim(item.substr(eq + 1));
        parse_memory(d.memory_requested);
      }
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
  }

  auto parallel = get(sge::kParallel);
  if (parallel.empty() || parallel == "0") {
    d.parallel = false;
  } else if (parallel == "1") {
    d.parallel = true;
  } else {
    throw parse_error("parallel must be 0 or 1");
  }

  auto slots = get(sge::kSlots);
  if (slots.empty()) {
    d.cores = 1;
  } else {
    auto n = to_int<int>(slots);
    if (!n || *n < 1) throw parse_error("slots must be a positive integer");
    d.cores = *n;
  }

  std::string_view usage = get(sge::kUsage);
  std::size_t start = 0;
  while (!usage.empty()) {
    auto comma = usage.find(',', start);
    auto item = trim(usage.substr(
        start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    auto eq = item.find('=');
    if (eq == std::string_view::npos) throw parse_error("usage entry without '='");
    auto key = trim(item.substr(0, eq));
    auto value = trim(item.substr(eq + 1));
    if (key == sge::kUsageCpu) {
      if (value != "N/A") {
        auto cpu = parse_duration(value);
        if (!cpu) throw parse_error("bad cpu usage duration");
        d.cpu_time_used = *cpu;
      }
    } else if (key == sge::kUsageVmem) {
      d.current_memory = memory_or_zero(value);
    } else if (key == sge::kUsageMaxvmem) {
      d.maximum_memory = memory_or_zero(value);
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }

  if (auto runtime = get(sge::kRuntime); !runtime.empty()) {
    auto rt = parse_duration(runtime);
    if (!rt) throw parse_error("bad runtime duration");
    d.run_time = *rt;
  }
  if (auto remaining = get(sge::kTimeRemaining); !remaining.empty() && remaining != "N/A") {
    auto tr = parse_duration(remaining);
    if (!tr) throw parse_error("bad time_remaining duration");
    d.time_remaining = *tr;
  }

  if (d.maximum_memory < d.current_memory) throw parse_error("maxvmem below vmem");
  if (!d.parallel && d.cores != 1) throw parse_error("non-parallel job with more than one slot");
  return d;
}

AccountingRecord SgeAdapter::parse_accounting(std::string_view raw) const {
  std::map<std::string, std::string, std::less<>> kv;
  for (auto line : split_lines(raw)) {
    auto t = trim(line);
    if (t.empty() || t.front() == '=') continue;
    if (t.starts_with("error:") && t.find(sge::kAccountingMissing) != std::string_view::npos)
      throw Error(Errc::NotFinished, std::string(t));
    auto tokens = split_ws(t);
    if (tokens.empty()) continue;
    auto key = tokens[0];
    auto value = trim(t.substr(key.size()));
    kv.emplace(std::string(key), std::string(value));
  }
  auto get = [&](std::string_view key) -> std::optional<std::string_view> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return std::string_view{it->second};
  };

  AccountingRecord acct;
  auto id_text = get(sge::kJobNumber);
  auto id = id_text ? to_int<JobId>(*id_text) : std::nullopt;
  if (!id || *id <= 0) throw parse_error("accounting record without job_number");
  acct.job_id = *id;

  auto exit_text = get(sge::kExitStatus);
  if (!exit_text) throw parse_error("accounting record without exit_status");
  auto exit_tokens = split_ws(*exit_text);
  auto exit_code = exit_tokens.empty() ? std::nullopt : to_int<int>(exit_tokens[0]);
  if (!exit_code) throw parse_error("exit_status is not an integer");
  acct.exit_code = *exit_code;

  bool deleted = false;
  if (auto del = get(sge::kDeleted)) {
    if (*del == "1") deleted = true;
    else if (*del != "0") throw parse_error("deleted must be 0 or 1");
  }

  if (auto wall = get(sge::kWallclock)) {
    std::string_view w = *wall;
    if (w.ends_with('s')) w.remove_suffix(1);
    double secs = 0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), secs);
    if (ec != std::errc{} || ptr != w.data() + w.size() || secs < 0)
      throw parse_error("ru_wallclock is not a duration in seconds");
    acct.final_run_time = Seconds{static_cast<long long>(std::llround(secs))};
  }
  if (auto maxvmem = get(sge::kUsageMaxvmem)) acct.maximum_memory = memory_or_zero(*maxvmem);

  if (deleted) acct.final_status = JobStatus::Deleted;
  else if (acct.exit_code == 0) acct.final_status = JobStatus::Completed;
  else acct.final_status = JobStatus::Error;
  return acct;
}

JobId SgeAdapter::parse_submit(std::string_view raw) const {
  auto pos = raw.find(sge::kSubmittedPrefix);
  if (pos == std::string_view::npos) throw parse_error("no submission acknowledgement");
  auto rest = raw.substr(pos + sge::kSubmittedPrefix.size());
  auto end = rest.find_first_not_of("0123456789");
  auto id = to_int<JobId>(rest.substr(0, end));
  if (!id || *id <= 0) throw parse_error("submission acknowledgement without a job id");
  return *id;
}

JobStatus SgeAdapter::map_status(std::string_view raw) const { return map_sge_status(raw); }

}  // namespace clusterscope
