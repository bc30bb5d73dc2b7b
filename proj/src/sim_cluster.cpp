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

#include "clusterscope/sim_cluster.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

#include "clusterscope/error.hpp"
#include "clusterscope/sge_grammar.hpp"
#include "clusterscope/units.hpp"

namespace clusterscope {

namespace {

constexpr int kCurveSteps = 4;
constexpr std::uint64_t kMiB = std::uint64_t{1} << 20;

ExecResult ok(std::string out) { return ExecResult{std::move(out), {}, 0, {}}; }

ExecResult fail(int code, std::string err) { return ExecResult{{}, std::move(err), code, {}}; }

std::optional<JobId> job_arg(std::string_view text) {
  JobId id{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), id);
  if (ec != std::errc{} || ptr != text.data() + text.size() || id <= 0) return std::nullopt;
  return id;
}

std::string stanza_line(std::string_view key, std::string_view value) {
  std::string line(key);
  line += ':';
  if (line.size() < 28) line.resize(28, ' ');
  line += value;
  line += '\n';
  return line;
}

std::string node_for(JobId id) { return "all.q@node" + std::to_string(id % 4 + 1); }

std::string join(const CommandLine& argv) {
  std::string out;
  for (const auto& a : argv) {
    if (!out.empty()) out += ' ';
    out += a;
  }
  return out;
}

/// Byte offset where the last `n` lines of `content` begin.
std::size_t tail_offset(std::string_view content, long long n) {
  if (n <= 0) return content.size();
  std::size_t end = content.size();
  if (end > 0 && content[end - 1] == '\n') --end;
  long long seen = 0;
  for (std::size_t i = end; i > 0; --i) {
    if (content[i - 1] == '\n' && ++seen == n) return i;
  }
  return 0;
}

/// Byte offset where line `k` (1-based) begins.
std::size_t from_line_offset(std::string_view content, long long k) {
  std::size_t pos = 0;
  for (long long line = 1; line < k; ++line) {
    auto nl = content.find('\n', pos);
    if (nl == std::string_view::npos) return content.size();
    pos = nl + 1;
  }
  return pos;
}

}  // namespace

std::uint64_t SimJob::memory_at(Seconds elapsed) const {
  std::uint64_t current = 0;
  for (const auto& step : memory_curve) {
    if (step.offset <= elapsed) current = step.bytes;
  }
  return current;
}

std::uint64_t SimJob::max_memory_until(Seconds elapsed) const {
  if (!start_at) return 0;
  std::uint64_t peak = 0;
  for (const auto& step : memory_curve) {
    if (step.offset <= elapsed) peak = std::max(peak, step.bytes);
  }
  return peak;
}

Seconds SimJob::run_time_at(Timestamp now) const {
  if (!start_at) return Seconds{0};
  Timestamp until = end_at ? std::min(*end_at, now) : now;
  return std::max(Seconds{0}, until - *start_at);
}

Seconds SimJob::wallclock() const {
  if (!start_at || !end_at) return Seconds{0};
  return *end_at - *start_at;
}

std::string format_memory_exact(std::uint64_t bytes) {
  if (bytes == 0) return "0";
  constexpr std::pair<char, unsigned> kUnits[] = {{'T', 40}, {'G', 30}, {'M', 20}, {'K', 10}};
  for (auto [suffix, shift] : kUnits) {
    unsigned __int128 unit = static_cast<unsigned __int128>(1) << shift;
    if (bytes < unit) continue;
    unsigned __int128 pow10 = 1;
    for (int decimals = 0; decimals <= 6; ++decimals, pow10 *= 10) {
      unsigned __int128 scaled = static_cast<unsigned __int128>(bytes) * pow10;
      if (scaled % unit != 0) continue;
      auto q = static_cast<std::uint64_t>(scaled / unit);
      auto p = static_cast<std::uint64_t>(pow10);
      std::string out = std::to_string(q / p);
      if (decimals > 0) {
        std::string frac = std::to_string(q % p);
        out += '.' + std::string(decimals - frac.size(), '0') + frac;
      }
      return out + suffix;
    }
  }
  return std::to_string(bytes);
}

std::string emit_list(std::span<const SimJob> jobs, Timestamp now) {
  (void)now;
  std::string out;
  bool any = false;
  for (const auto& job : jobs) {
    if (!job.live()) continue;
    if (!any) {
      out += sge::kListHeader;
      out += '\n';
      out += sge::kListSeparator;
      out += '\n';
      any = true;
    }
    const bool started = job.start_at.has_value();
    std::string queue = started ? node_for(job.job_id) : "";
    int slots = job.spec.parallel ? job.spec.cores : 1;
    char buf[1024];
    std::snprintf(buf, sizeof buf, "%7lld %7.5f %-10s %-12s %-5s %s %-30s %5d\n",
                  static_cast<long long>(job.job_id), 0.555, job.spec.job_name.c_str(),
                  job.owner.c_str(), std::string(sge::letters_for(job.state)).c_str(),
                  format_sge_time(started ? *job.start_at : job.submit_at).c_str(),
                  queue.c_str(), slots);
    out += buf;
  }
  return out;
}

std::string emit_detail(const SimJob& job, Timestamp now, Seconds wallclock_limit) {
  std::string out(62, '=');
  out += '\n';
  out += stanza_line(sge::kJobNumber, std::to_string(job.job_id));
  out += stanza_line(sge::kJobName, job.spec.job_name);
  out += stanza_line(sge::kOwner, job.owner);
  out += stanza_line(sge::kWorkdir, job.spec.source_directory);
  out += stanza_line(sge::kCmd, job.submit_command);
  out += stanza_line(sge::kScriptFile, job.spec.script_path);
  out += stanza_line(sge::kStdoutPath, job.stdout_path);
  out += stanza_line(sge::kStderrPath, job.stderr_path);
  out += stanza_line(sge::kHardResources,
                     std::string(sge::kVmemResource) + "=" + job.spec.memory_requested);
  out += stanza_line(sge::kParallel, job.spec.parallel ? "1" : "0");
  out += stanza_line(sge::kSlots, std::to_string(job.spec.parallel ? job.spec.cores : 1));
  if (job.start_at) {
    Seconds runtime = job.run_time_at(now);
    int cores = job.spec.parallel ? job.spec.cores : 1;
    std::string usage = std::string(sge::kUsageCpu) + "=" + format_duration(runtime * cores) +
                        ", " + std::string(sge::kUsageVmem) + "=" +
                        format_memory_exact(job.memory_at(runtime)) + ", " +
                        std::string(sge::kUsageMaxvmem) + "=" +
                        format_memory_exact(job.max_memory_until(runtime));
    out += stanza_line(sge::kUsage, usage);
    out += stanza_line(sge::kRuntime, format_duration(runtime));
    out += stanza_line(sge::kTimeRemaining,
                       format_duration(std::max(Seconds{0}, wallclock_limit - runtime)));
  }
  return out;
}

std::string emit_accounting(const SimJob& job) {
  auto line = [](std::string_view key, const std::string& value) {
    std::string l(key);
    l.resize(std::max<std::size_t>(l.size() + 1, 13), ' ');
    return l + value + "\n";
  };
  std::string out(62, '=');
  out += '\n';
  out += line("qname", "all.q");
  out += line("hostname", job.start_at ? node_for(job.job_id).substr(6) : "");
  out += line("owner", job.owner);
  out += line("jobname", job.spec.job_name);
  out += line(sge::kJobNumber, std::to_string(job.job_id));
  out += line(sge::kExitStatus, std::to_string(job.exit_code));
  out += line(sge::kDeleted, job.deleted ? "1" : "0");
  out += line(sge::kWallclock, std::to_string(job.wallclock().count()));
  out += line(sge::kUsageMaxvmem, format_memory_exact(job.max_memory_until(job.wallclock())));
  return out;
}

SimCluster::SimCluster(SimConfig config)
    : config_(config), rng_(config.seed), now_(config.epoch) {
  if (config_.queue_delay_min < Seconds{0} || config_.queue_delay_max < config_.queue_delay_min ||
      config_.run_duration_min < Seconds{kCurveSteps} ||
      config_.run_duration_max < config_.run_duration_min || config_.failure_rate < 0 ||
      config_.failure_rate > 1 || config_.accounting_lag < 0)
    throw Error(Errc::InvalidParams, "inconsistent simulator configuration");
}

Timestamp SimCluster::now() const {
  std::lock_guard lock(mu_);
  return now_;
}

std::vector<LoggedCommand> SimCluster::command_log() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::size_t SimCluster::command_count() const {
  std::lock_guard lock(mu_);
  return log_.size();
}

std::vector<SimJob> SimCluster::ledger() const {
  std::lock_guard lock(mu_);
  std::vector<SimJob> out;
  out.reserve(jobs_.size());
  for (const auto& [id, job] : jobs_) out.push_back(job);
  return out;
}

void SimCluster::put_file(const std::string& path, std::string content) {
  std::lock_guard lock(mu_);
  files_[path] = std::move(content);
}

std::optional<std::string> SimCluster::file(const std::string& path) const {
  std::lock_guard lock(mu_);
  auto it = files_.find(path);
  if (it == files_.end()) return std::nullopt;
  return it->second;
}

void SimCluster::set_unreadable(const std::string& path) {
  std::lock_guard lock(mu_);
  unreadable_.insert(path);
}

void SimCluster::append_file(const std::string& path, const std::string& line) {
  files_[path] += line + "\n";
}

SimJob* SimCluster::find(JobId id) {
  auto it = jobs_.find(id);
  return it == jobs_.end() ? nullptr : &it->second;
}

ExecResult SimCluster::handle_command(const CommandLine& argv, std::string_view as_user) {
  std::lock_guard lock(mu_);
  log_.push_back({argv, std::string(as_user), now_});
  ExecResult result;
  if (argv.empty()) {
    result = fail(127, "sh: empty command\n");
  } else if (argv[0] == sge::kQsub) {
    result = qsub(argv, as_user);
  } else if (argv[0] == sge::kQstat) {
    result = qstat(argv);
  } else if (argv[0] == sge::kQdel) {
    result = qdel(argv);
  } else if (argv[0] == sge::kQacct) {
    result = qacct(argv);
  } else if (argv[0] == "tail") {
    result = tail(argv);
  } else if (argv[0] == "cat") {
    result = cat(argv);
  } else {
    result = fail(127, "sh: " + argv[0] + ": command not found\n");
  }
  result.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(config_.stall);
  return result;
}

ExecResult SimCluster::qsub(const CommandLine& argv, std::string_view user) {
  if (argv.size() < 2) return fail(2, "qsub: no script file given\n");
  SimJob job;
  job.owner = user;
  job.spec.script_path = argv.back();
  job.spec.memory_requested = "1G";
  job.spec.source_directory = "/home/" + std::string(user);
  for (std::size_t i = 1; i + 1 < argv.size(); ++i) {
    const auto& a = argv[i];
    auto value = [&]() -> std::optional<std::string> {
      if (i + 1 >= argv.size() - 1) return std::nullopt;
      return argv[++i];
    };
    if (a == "-N") {
      auto v = value();
      if (!v) return fail(2, "qsub: option -N needs a value\n");
      job.spec.job_name = *v;
    } else if (a == "-wd") {
      auto v = value();
      if (!v) return fail(2, "qsub: option -wd needs a value\n");
      job.spec.source_directory = *v;
    } else if (a == "-l") {
      auto v = value();
      if (!v) return fail(2, "qsub: option -l needs a value\n");
      auto prefix = std::string(sge::kVmemResource) + "=";
      if (v->starts_with(prefix)) job.spec.memory_requested = v->substr(prefix.size());
      else job.spec.extra_args.insert(job.spec.extra_args.end(), {"-l", *v});
    } else if (a == "-o") {
      auto v = value();
      if (!v) return fail(2, "qsub: option -o needs a value\n");
      job.spec.output_path = *v;
    } else if (a == "-pe") {
      if (i + 2 >= argv.size() - 1) return fail(2, "qsub: option -pe needs two values\n");
      ++i;  // environment name
      auto cores = job_arg(argv[++i]);
      if (!cores) return fail(2, "qsub: bad slot count\n");
      job.spec.parallel = true;
      job.spec.cores = static_cast<int>(*cores);
    } else {
      job.spec.extra_args.push_back(a);
    }
  }
  if (job.spec.job_name.empty()) {
    auto slash = job.spec.script_path.rfind('/');
    job.spec.job_name = slash == std::string::npos ? job.spec.script_path
                                                   : job.spec.script_path.substr(slash + 1);
  }
  std::uint64_t requested = 0;
  try {
    requested = parse_memory(job.spec.memory_requested);
  } catch (const Error&) {
    return fail(2, "qsub: unknown resource value \"" + job.spec.memory_requested + "\"\n");
  }

  job.job_id = next_id_++;
  job.submit_command = join(argv);
  job.submit_at = now_;
  job.state = JobStatus::Queued;
  std::string stem = job.spec.source_directory + "/" + job.spec.job_name;
  job.stdout_path = job.spec.output_path.value_or(stem + ".o" + std::to_string(job.job_id));
  job.stderr_path = stem + ".e" + std::to_string(job.job_id);

  // Fixed draw order keeps the ledger a function of (seed, command sequence).
  auto uniform_seconds = [&](Seconds lo, Seconds hi) {
    std::uniform_int_distribution<long long> dist(lo.count(), hi.count());
    return Seconds{dist(rng_)};
  };
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  job.planned_delay = uniform_seconds(config_.queue_delay_min, config_.queue_delay_max);
  Seconds duration = uniform_seconds(config_.run_duration_min, config_.run_duration_max);
  const bool failing = unit(rng_) < config_.failure_rate;
  const bool memory_kill = unit(rng_) < 0.5;

  std::uint64_t limit_mib = std::max<std::uint64_t>(requested / kMiB, 32);
  std::uniform_int_distribution<std::uint64_t> mib(16, std::max<std::uint64_t>(16, limit_mib * 9 / 10));
  for (int k = 0; k < kCurveSteps; ++k) {
    job.memory_curve.push_back({duration * k / kCurveSteps, mib(rng_) * kMiB});
  }
  std::uniform_int_distribution<int> pick_step(1, kCurveSteps - 1);
  std::uniform_int_distribution<std::uint64_t> overshoot(1, 256);
  const int kill_step = pick_step(rng_);
  const std::uint64_t over = overshoot(rng_);
  const Seconds early_exit = uniform_seconds(Seconds{1}, duration);

  job.planned_duration = duration;
  job.exit_code = 0;
  if (failing && memory_kill) {
    job.memory_curve[kill_step].bytes = requested + over * kMiB;
    job.memory_curve.resize(kill_step + 1);
    job.planned_duration = std::max(Seconds{1}, job.memory_curve[kill_step].offset);
    job.exit_code = 137;
  } else if (failing) {
    job.planned_duration = early_exit;
    job.exit_code = 1;
    std::erase_if(job.memory_curve,
                  [&](const MemoryStep& s) { return s.offset > Seconds{0} && s.offset >= early_exit; });
  }
  job.history.push_back({job.job_id, JobStatus::Unknown, JobStatus::Queued, now_});

  JobId id = job.job_id;
  std::string name = job.spec.job_name;
  jobs_.emplace(id, std::move(job));
  return ok(std::string(sge::kSubmittedPrefix) + std::to_string(id) + " (\"" + name +
            "\") has been submitted\n");
}

ExecResult SimCluster::qstat(const CommandLine& argv) {
  if (argv.size() == 3 && argv[1] == "-j") {
    auto id = job_arg(argv[2]);
    SimJob* job = id ? find(*id) : nullptr;
    if (!job || !job->live())
      return fail(1, "Following jobs do not exist: \n" + argv[2] + "\n");
    return ok(emit_detail(*job, now_, config_.wallclock_limit));
  }
  std::string user_filter = std::string(sge::kAllUsers);
  if (argv.size() == 3 && argv[1] == "-u") {
    user_filter = argv[2];
  } else if (argv.size() != 1) {
    return fail(2, "qstat: unsupported arguments\n");
  }
  std::vector<SimJob> selected;
  for (const auto& [id, job] : jobs_) {
    if (user_filter == sge::kAllUsers || job.owner == user_filter) selected.push_back(job);
  }
  return ok(emit_list(selected, now_));
}

ExecResult SimCluster::qdel(const CommandLine& argv) {
  if (argv.size() != 2) return fail(2, "qdel: expected one job id\n");
  auto id = job_arg(argv[1]);
  SimJob* job = id ? find(*id) : nullptr;
  if (!job || !job->live()) return fail(1, "denied: job \"" + argv[1] + "\" does not exist\n");
  std::vector<SimTransition> ignored;
  job->deleted = true;
  job->exit_code = job->start_at ? 137 : 0;
  finish(*job, JobStatus::Deleted, now_, ignored);
  return ok(job->owner + " has deleted job " + argv[1] + "\n");
}

ExecResult SimCluster::qacct(const CommandLine& argv) {
  if (argv.size() != 3 || argv[1] != "-j") return fail(2, "qacct: expected -j <job id>\n");
  auto id = job_arg(argv[2]);
  SimJob* job = id ? find(*id) : nullptr;
  const bool available = job && job->ended_at_advance && !config_.accounting_unavailable &&
                         advance_count_ - *job->ended_at_advance >= config_.accounting_lag;
  if (!available) return fail(1, "error: job id " + argv[2] + " not found\n");
  return ok(emit_accounting(*job));
}

ExecResult SimCluster::tail(const CommandLine& argv) const {
  bool verbose = false;
  bool from_start = false;
  long long count = 10;
  std::vector<std::string> paths;
  for (std::size_t i = 1; i < argv.size(); ++i) {
    if (argv[i] == "-v") {
      verbose = true;
    } else if (argv[i] == "-n" && i + 1 < argv.size()) {
      std::string_view n = argv[++i];
      from_start = n.starts_with('+');
      if (from_start) n.remove_prefix(1);
      auto [ptr, ec] = std::from_chars(n.data(), n.data() + n.size(), count);
      if (ec != std::errc{} || ptr != n.data() + n.size() || count < 0)
        return fail(1, "tail: invalid number of lines: '" + argv[i] + "'\n");
    } else {
      paths.push_back(argv[i]);
    }
  }
  ExecResult result;
  bool printed_header = false;
  for (const auto& path : paths) {
    auto it = files_.find(path);
    if (it == files_.end() || unreadable_.count(path)) {
      result.stderr_text += "tail: cannot open '" + path + "' for reading: " +
                            (it == files_.end() ? "No such file or directory" : "Permission denied") +
                            "\n";
      result.exit_code = 1;
      continue;
    }
    if (verbose || paths.size() > 1) {
      result.stdout_text += (printed_header ? "\n==> " : "==> ") + path + " <==\n";
      printed_header = true;
    }
    std::string_view content = it->second;
    auto start = from_start ? from_line_offset(content, count) : tail_offset(content, count);
    result.stdout_text += content.substr(start);
  }
  return result;
}

ExecResult SimCluster::cat(const CommandLine& argv) const {
  ExecResult result;
  for (std::size_t i = 1; i < argv.size(); ++i) {
    auto it = files_.find(argv[i]);
    if (it == files_.end() || unreadable_.count(argv[i])) {
      result.stderr_text += "cat: " + argv[i] + ": " +
                            (it == files_.end() ? "No such file or directory" : "Permission denied") +
                            "\n";
      result.exit_code = 1;
      continue;
    }
    result.stdout_text += it->second;
  }
  return result;
}

void SimCluster::finish(SimJob& job, JobStatus to, Timestamp at, std::vector<SimTransition>& out) {
  SimTransition t{job.job_id, job.state, to, at};
  job.state = to;
  job.end_at = at;
  job.ended_at_advance = advance_count_;
  job.history.push_back(t);
  out.push_back(t);
  if (to == JobStatus::Error) {
    append_file(job.stderr_path, job.exit_code == 137
                                     ? "Error: job exceeded h_vmem=" + job.spec.memory_requested +
                                           " and was killed"
                                     : "Error: process exited with status " +
                                           std::to_string(job.exit_code));
  }
}

std::vector<SimTransition> SimCluster::advance_clock(Seconds dt) {
  if (dt <= Seconds{0}) throw Error(Errc::InvalidParams, "advance_clock needs dt > 0");
  std::lock_guard lock(mu_);
  std::vector<SimTransition> out;
  const Timestamp until = now_ + dt;
  ++advance_count_;
  for (auto& [id, job] : jobs_) {
    if (job.state == JobStatus::Queued && job.submit_at + job.planned_delay <= until) {
      Timestamp start = job.submit_at + job.planned_delay;
      SimTransition t{id, JobStatus::Queued, JobStatus::Running, start};
      job.state = JobStatus::Running;
      job.start_at = start;
      job.history.push_back(t);
      out.push_back(t);
      append_file(job.stdout_path, "[" + format_iso8601(start) + "] " + job.spec.job_name +
                                       " started on " + node_for(id).substr(6));
      if (job.exit_code == 137) {
        append_file(job.stderr_path, "WARNING: memory usage approaching h_vmem limit");
      }
    }
    if (job.state == JobStatus::Running) {
      Timestamp end = *job.start_at + job.planned_duration;
      if (end <= until) {
        finish(job, job.exit_code == 0 ? JobStatus::Completed : JobStatus::Error, end, out);
        append_file(job.stdout_path, "[" + format_iso8601(end) + "] finished");
      } else {
        append_file(job.stdout_path, "[" + format_iso8601(until) + "] running, vmem=" +
                                         format_memory_exact(job.memory_at(until - *job.start_at)));
      }
    }
  }
  now_ = until;
  return out;
}

}  // namespace clusterscope
