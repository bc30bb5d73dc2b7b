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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <Eigen/Dense>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "clusterscope/analytics.hpp"
#include "clusterscope/error.hpp"
#include "harness.hpp"

using namespace clusterscope;
using namespace clusterscope::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome fail(std::string why) { return {false, std::move(why)}; }

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string csv_of(const JobStore& store) {
  std::ostringstream out;
  store.export_csv(out);
  return out.str();
}

/// CSV rows keyed by the jobId column. Test data has no embedded newlines.
std::map<JobId, std::string> csv_rows(const JobStore& store) {
  std::map<JobId, std::string> rows;
  std::istringstream in(csv_of(store));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) rows[std::stoll(line.substr(0, line.find(',')))] = line;
  return rows;
}

bool is_detail(const LoggedCommand& c) { return c.argv.size() == 3 && c.argv[0] == "qstat" && c.argv[1] == "-j"; }
bool is_list(const LoggedCommand& c) { return !c.argv.empty() && c.argv[0] == "qstat" && !is_detail(c); }

// 1. lifecycle against the simulator ledger --------------------------------

Outcome lifecycle() {
  auto t0 = std::chrono::steady_clock::now();
  SimConfig sc;
  sc.seed = 2026;
  sc.failure_rate = 0.3;
  sc.accounting_lag = 2;
  sc.run_duration_max = Seconds{1800};
  GatewayConfig gc = test_gateway_config();
  gc.threshold = 1000;
  SimEnv env(sc, gc);

  const std::vector<std::string> users{"alice", "bob", "carol"};
  std::map<JobId, std::string> owner;
  std::set<JobId> cancel_running;
  std::size_t cancels = 0;
  for (int i = 0; i < 60; ++i) {
    const auto& user = users[static_cast<std::size_t>(i) % users.size()];
    JobId id = env.submit(user, simple_spec("job" + std::to_string(i), user));
    owner[id] = user;
    if (i % 10 == 0) {
      env.gateway.handle({user, RequestKind::Cancel, id});  // still queued
      ++cancels;
    } else if (i % 10 == 5) {
      cancel_running.insert(id);
    }
    if (i % 4 == 3) {
      env.advance(Seconds{30});
      env.scheduler.tick(env.clock.now());
    }
  }

  for (int guard = 0; guard < 2000; ++guard) {
    env.advance(Seconds{30});
    for (const auto& job : env.sim.ledger()) {
      if (cancel_running.count(job.job_id) && job.state == JobStatus::Running) {
        env.gateway.handle({owner[job.job_id], RequestKind::Cancel, job.job_id});
        cancel_running.erase(job.job_id);
        ++cancels;
      }
    }
    env.scheduler.tick(env.clock.now());
    auto ledger = env.sim.ledger();
    bool live = std::any_of(ledger.begin(), ledger.end(), [](const SimJob& j) { return j.live(); });
    if (!live && env.store.unfinalized_ids().empty()) break;
  }

  using Row = std::tuple<JobId, std::string, std::string, std::uint64_t>;
  std::set<Row> expected, actual;
  std::map<JobStatus, int> mix;
  for (const auto& job : env.sim.ledger()) {
    expected.insert({job.job_id, std::string(to_string(job.state)), format_duration(job.wallclock()),
                     job.max_memory_until(job.wallclock())});
    ++mix[job.state];
  }
  HistoryQuery all;
  all.allow_all = true;
  for (const auto& r : env.store.list_jobs(all))
    actual.insert({r.job_id, r.final_status, r.final_run_time, r.maximum_memory});

  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream d;
  d << expected.size() << " jobs (" << mix[JobStatus::Completed] << " completed, "
    << mix[JobStatus::Error] << " error, " << mix[JobStatus::Deleted] << " deleted), " << secs
    << " s";
  if (expected.size() < 50) return fail("too few jobs: " + d.str());
  if (mix[JobStatus::Completed] == 0 || mix[JobStatus::Error] == 0 || mix[JobStatus::Deleted] == 0)
    return fail("scenario lacks a terminal state: " + d.str());
  if (actual != expected) {
    std::vector<Row> diff;
    std::set_symmetric_difference(expected.begin(), expected.end(), actual.begin(), actual.end(),
                                  std::back_inserter(diff));
    return fail(d.str() + "; " + std::to_string(diff.size()) + " rows differ, first job " +
                std::to_string(std::get<0>(diff.front())));
  }
  if (secs >= 10.0) return fail("too slow: " + d.str());
  return {true, d.str()};
}

// 2. two-phase poll shape ----------------------------------------------------

Outcome poll_shape() {
  std::mt19937_64 rng(42);
  std::size_t ticks = 0, max_due = 0;
  for (int state = 0; state < 100; ++state) {
    SimConfig sc;
    sc.seed = rng();
    sc.failure_rate = std::uniform_real_distribution<double>(0, 0.5)(rng);
    sc.run_duration_max = Seconds{std::uniform_int_distribution<int>(60, 2000)(rng)};
    PollConfig pc;
    pc.detail_batch_limit = std::uniform_int_distribution<int>(1, 12)(rng);
    GatewayConfig gc = test_gateway_config();
    gc.threshold = 1000;
    SimEnv env(sc, gc, pc);

    int jobs = std::uniform_int_distribution<int>(0, 25)(rng);
    for (int i = 0; i < jobs; ++i) {
      std::string user = i % 2 ? "alice" : "bob";
      JobId id = env.submit(user, simple_spec("s" + std::to_string(i), user));
      if (rng() % 8 == 0) env.gateway.handle({user, RequestKind::Cancel, id});
      if (rng() % 3 == 0) env.advance(Seconds{std::uniform_int_distribution<int>(1, 300)(rng)});
    }
    for (int t = 0; t < 3; ++t) {
      env.advance(Seconds{std::uniform_int_distribution<int>(1, 400)(rng)});
      auto ledger = env.sim.ledger();
      std::size_t active = static_cast<std::size_t>(std::count_if(
          ledger.begin(), ledger.end(), [](const SimJob& j) { return j.live(); }));
      std::size_t due = std::min(active, static_cast<std::size_t>(pc.detail_batch_limit));
      std::size_t since = env.sim.command_count();
      auto report = env.scheduler.tick(env.clock.now());
      auto log = env.sim.command_log();
      std::size_t lists = 0, details = 0;
      for (std::size_t i = since; i < log.size(); ++i) {
        lists += is_list(log[i]);
        details += is_detail(log[i]);
      }
      ++ticks;
      max_due = std::max(max_due, due);
      if (lists != 1 || details != due || !report.errors.empty()) {
        std::ostringstream d;
        d << "state " << state << " tick " << t << ": " << lists << " lists, " << details
          << " details, expected " << due << " (active " << active << ", limit "
          << pc.detail_batch_limit << ", errors " << report.errors.size() << ")";
        return fail(d.str());
      }
    }
  }
  return {true, std::to_string(ticks) + " ticks over 100 states, largest batch " +
                    std::to_string(max_due)};
}

// 3. throttle footprint and exact backoff --------------------------------------

Seconds backoff_oracle(int k, const GatewayConfig& c) {
  Seconds::rep v = c.backoff_base.count();
  for (int i = 1; i < k && v < c.backoff_cap.count(); ++i) v *= 2;
  return Seconds{std::min(v, c.backoff_cap.count())};
}

Outcome throttle_footprint() {
  GatewayConfig gc = test_gateway_config();
  gc.threshold = 10;
  gc.window = Seconds{10};
  gc.backoff_base = Seconds{1};
  gc.backoff_cap = Seconds{64};
  SimConfig sc;
  sc.seed = 5;
  sc.run_duration_min = Seconds{4000};
  sc.run_duration_max = Seconds{5000};
  SimEnv env(sc, gc);

  std::vector<JobId> ids;
  for (int i = 0; i < 3; ++i) ids.push_back(env.submit("alice", simple_spec("f" + std::to_string(i), "alice")));
  env.advance(Seconds{120});
  std::size_t since = env.sim.command_count();

  std::mt19937_64 rng(3);
  const std::vector<int> gaps{0, 0, 1, 1, 2, 5, 11, 30, 70};
  std::size_t mismatches = 0, rejects = 0, cached = 0, checked = 0;
  for (int i = 0; i < 1000; ++i) {
    if (i % 10 == 0) {
      Seconds gap{gaps[rng() % gaps.size()]};
      if (gap > Seconds{0}) env.advance(gap);
    }
    JobRequest req{"alice", RequestKind::Status, UserRef{"alice"}};
    if (rng() % 2) req = {"alice", RequestKind::StatusDetail, ids[rng() % ids.size()]};
    const Timestamp now = env.clock.now();
    std::optional<Seconds> retry;
    bool from_cache = false;
    try {
      from_cache = env.gateway.handle(req).from_cache;
    } catch (const Error& e) {
      if (e.code() != Errc::Throttled) return fail(std::string("unexpected error: ") + e.what());
      retry = e.retry_after();
      ++rejects;
    }
    cached += from_cache;
    auto st = env.gateway.throttle_state("alice");
    if (retry || from_cache) {
      ++checked;
      Seconds want = backoff_oracle(st.consecutive_violations, gc);
      if (!st.blocked_until || *st.blocked_until != now + want) ++mismatches;
      if (retry && *retry != want) ++mismatches;
    }
  }

  auto log = env.sim.command_log();
  std::vector<Timestamp> at;
  for (std::size_t i = since; i < log.size(); ++i)
    if (log[i].user == "alice") at.push_back(log[i].at);
  std::size_t worst = 0;
  for (std::size_t i = 0; i < at.size(); ++i) {
    std::size_t n = 0;
    for (std::size_t j = i; j < at.size() && at[j] < at[i] + gc.window; ++j) ++n;
    worst = std::max(worst, n);
  }

  // Cold sequence: a fresh principal at one instant, non-cacheable kind.
  std::vector<Seconds> got, want;
  env.advance(Seconds{100});
  JobRequest submit{"bob", RequestKind::Submit, simple_spec("b", "bob")};
  for (int i = 0; i < gc.threshold; ++i) env.gateway.admit(submit, env.clock.now());
  for (int k = 1; k <= 12; ++k) {
    auto d = env.gateway.admit(submit, env.clock.now());
    got.push_back(d.kind == AdmitDecision::Kind::Reject ? d.retry_after : Seconds{-1});
    want.push_back(backoff_oracle(k, gc));
  }

  std::ostringstream d;
  d << at.size() << " commands for 1000 requests, max " << worst << " per 10 s window, "
    << rejects << " rejected, " << cached << " cached, " << checked << " backoff checks";
  if (worst > 10) return fail(d.str());
  if (mismatches) return fail(d.str() + ", " + std::to_string(mismatches) + " backoff mismatches");
  if (got != want) return fail(d.str() + ", cold backoff sequence differs");
  return {true, d.str()};
}

// 4. cache serves the last dispatch byte for byte ------------------------------

Outcome cache_semantics() {
  GatewayConfig gc = test_gateway_config();
  gc.threshold = 3;
  gc.window = Seconds{10};
  gc.cache_ttl = Seconds{60};
  SimConfig sc;
  sc.seed = 9;
  sc.failure_rate = 0;
  sc.run_duration_min = Seconds{5000};
  sc.run_duration_max = Seconds{6000};
  SimEnv env(sc, gc);
  std::vector<JobId> ids;
  for (int i = 0; i < 3; ++i) ids.push_back(env.submit("alice", simple_spec("c" + std::to_string(i), "alice")));
  env.advance(Seconds{100});

  std::mt19937_64 rng(4);
  std::size_t served = 0;
  for (int round = 0; round < 50; ++round) {
    env.advance(Seconds{std::uniform_int_distribution<int>(11, 30)(rng)});
    JobRequest req{"alice", RequestKind::Status, UserRef{"alice"}};
    if (round % 2) req = {"alice", RequestKind::StatusDetail, ids[rng() % ids.size()]};
    std::string last;
    Timestamp last_at{};
    for (int i = 0; i < gc.threshold; ++i) {
      auto r = env.gateway.handle(req);
      if (r.from_cache) return fail("round " + std::to_string(round) + ": cache served under threshold");
      last = r.payload;
      last_at = env.clock.now();
      env.advance(Seconds{1});
    }
    int extra = std::uniform_int_distribution<int>(1, 5)(rng);
    for (int i = 0; i < extra; ++i) {
      auto r = env.gateway.handle(req);
      if (!r.from_cache || r.payload != last || r.stored_at != last_at)
        return fail("round " + std::to_string(round) + ": over-threshold payload differs");
      ++served;
    }
    auto key = Gateway::cache_key(req);
    if (!env.gateway.cache_lookup(key, last_at + gc.cache_ttl))
      return fail("entry missing at exactly ttl");
    if (env.gateway.cache_lookup(key, last_at + gc.cache_ttl + Seconds{1}))
      return fail("entry served after ttl");
  }

  // End to end with a ttl shorter than the window: an expired entry is not served.
  GatewayConfig short_ttl = gc;
  short_ttl.cache_ttl = Seconds{5};
  SimEnv env2(sc, short_ttl);
  JobRequest req{"alice", RequestKind::Status, UserRef{"alice"}};
  for (int i = 0; i < short_ttl.threshold; ++i) env2.gateway.handle(req);
  env2.advance(Seconds{6});
  try {
    env2.gateway.handle(req);
    return fail("expired entry served");
  } catch (const Error& e) {
    if (e.code() != Errc::Throttled) return fail(std::string("unexpected error: ") + e.what());
  }
  return {true, std::to_string(served) + " over-threshold serves identical, post-ttl lookups miss"};
}

// 5. adapter round trip over random simulator states ---------------------------

std::string random_name(std::mt19937_64& rng) {
  static constexpr char kChars[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_.-";
  std::string s;
  int n = std::uniform_int_distribution<int>(1, 24)(rng);
  s += kChars[rng() % 52];
  for (int i = 1; i < n; ++i) s += kChars[rng() % (sizeof(kChars) - 1)];
  return s;
}

Outcome adapter_round_trip() {
  const std::vector<std::string> users{"alice", "bob", "carol", "dave_x", "e1"};
  const std::vector<std::string> memory{"100M", "512M", "1G", "1.5G", "2G", "3G", "8G", "750K"};
  SgeAdapter adapter;
  std::mt19937_64 rng(555);
  std::size_t listings = 0, details = 0, accounting = 0;
  for (int state = 0; state < 1000; ++state) {
    SimConfig sc;
    sc.seed = rng();
    sc.failure_rate = std::uniform_real_distribution<double>(0, 0.6)(rng);
    sc.run_duration_max = Seconds{std::uniform_int_distribution<int>(60, 20000)(rng)};
    sc.accounting_lag = static_cast<int>(rng() % 3);
    SimCluster sim(sc);
    int jobs = std::uniform_int_distribution<int>(0, 12)(rng);
    for (int i = 0; i < jobs; ++i) {
      SubmitSpec spec;
      spec.job_name = random_name(rng);
      spec.script_path = "/home/x/" + random_name(rng) + ".sh";
      spec.source_directory = "/scratch/" + random_name(rng);
      spec.memory_requested = memory[rng() % memory.size()];
      if (rng() % 3 == 0) {
        spec.parallel = true;
        spec.cores = std::uniform_int_distribution<int>(2, 16)(rng);
      }
      auto out = sim.handle_command(adapter.render_command(CommandKind::Submit, spec),
                                    users[rng() % users.size()]);
      if (out.exit_code != 0) return fail("submit rejected: " + out.stderr_text);
      if (rng() % 2) sim.advance_clock(Seconds{std::uniform_int_distribution<int>(1, 3000)(rng)});
      if (rng() % 10 == 0) sim.handle_command({"qdel", std::to_string(adapter.parse_submit(out.stdout_text))});
    }
    sim.advance_clock(Seconds{std::uniform_int_distribution<int>(1, 5000)(rng)});

    const auto ledger = sim.ledger();
    const Timestamp now = sim.now();
    using Key = std::tuple<JobId, JobStatus, std::string, std::string>;
    std::set<Key> truth, parsed;
    for (const auto& j : ledger)
      if (j.live()) truth.insert({j.job_id, j.state, j.owner, j.spec.job_name});
    for (const auto& row : adapter.parse_job_list(sim.handle_command({"qstat", "-u", "*"}).stdout_text))
      parsed.insert({row.job_id, row.status, row.user, row.job_name});
    if (parsed != truth) return fail("listing differs in state " + std::to_string(state));
    ++listings;

    for (const auto& j : ledger) {
      if (j.live()) {
        auto raw = sim.handle_command({"qstat", "-j", std::to_string(j.job_id)}).stdout_text;
        if (raw != emit_detail(j, now, sc.wallclock_limit))
          return fail("simulator output is not the reference emission");
        auto d = adapter.parse_job_detail(raw);
        Seconds rt = j.run_time_at(now);
        int cores = j.spec.parallel ? j.spec.cores : 1;
        bool ok = d.job_id == j.job_id && d.job_name == j.spec.job_name && d.owner == j.owner &&
                  d.script_path == j.spec.script_path &&
                  d.source_directory == j.spec.source_directory &&
                  d.output_path == j.stdout_path && d.error_path == j.stderr_path &&
                  d.memory_requested == j.spec.memory_requested &&
                  d.parallel == j.spec.parallel && d.cores == cores;
        if (j.start_at) {
          ok = ok && d.run_time == rt && d.cpu_time_used == rt * cores &&
               d.current_memory == j.memory_at(rt) && d.maximum_memory == j.max_memory_until(rt) &&
               d.time_remaining == std::max(Seconds{0}, sc.wallclock_limit - rt) &&
               format_memory_exact(d.maximum_memory) == format_memory_exact(j.max_memory_until(rt));
        }
        if (!ok) return fail("detail differs for job " + std::to_string(j.job_id) + " in state " +
                             std::to_string(state));
        ++details;
      } else {
        auto out = sim.handle_command({"qacct", "-j", std::to_string(j.job_id)});
        if (out.exit_code != 0) continue;  // still inside the accounting lag
        auto a = adapter.parse_accounting(out.stdout_text);
        if (a.job_id != j.job_id || a.final_status != j.state || a.final_run_time != j.wallclock() ||
            a.maximum_memory != j.max_memory_until(j.wallclock()) || a.exit_code != j.exit_code)
          return fail("accounting differs for job " + std::to_string(j.job_id));
        ++accounting;
      }
    }
  }
  return {true, std::to_string(listings) + " listings, " + std::to_string(details) + " details, " +
                    std::to_string(accounting) + " accounting records"};
}

// 6. key material at rest --------------------------------------------------------

bool leaks(std::string_view haystack, std::string_view secret) {
  constexpr std::size_t kWindow = 16;
  for (std::size_t i = 0; i + kWindow <= secret.size(); i += 4)
    if (haystack.find(secret.substr(i, kWindow)) != std::string_view::npos) return true;
  return false;
}

/// The random body only; the armor lines are the same for every key.
std::string key_body(const std::string& key) {
  auto start = key.find('\n') + 1;
  auto end = key.rfind("\n-----END");
  return key.substr(start, end - start);
}

Outcome key_security() {
  TempDir dir;
  std::ostringstream logs;
  auto previous = spdlog::default_logger();
  auto capture = std::make_shared<spdlog::logger>(
      "capture", std::make_shared<spdlog::sinks::ostream_sink_mt>(logs));
  capture->set_level(spdlog::level::trace);
  spdlog::set_default_logger(capture);
  struct Restore {
    std::shared_ptr<spdlog::logger> l;
    ~Restore() { spdlog::set_default_logger(l); }
  } restore{previous};

  std::mt19937_64 rng(606);
  std::vector<std::string> keys, pass, ids;
  std::string errors;
  KeyStoreOptions opts = key_options(dir);
  std::size_t wrong_refused = 0;
  {
    KeyStore ks(opts);
    for (int i = 0; i < 100; ++i) {
      keys.push_back(random_key_material(rng, std::uniform_int_distribution<std::size_t>(64, 3000)(rng)));
      pass.push_back("pass-" + std::to_string(rng()));
      ids.push_back(ks.store_key(keys.back(), pass.back(), "u" + std::to_string(i), "h", 22));
    }
    for (int i = 0; i < 100; ++i) {
      std::string wrong = i % 2 ? pass[static_cast<std::size_t>(i)] + "x" : pass[static_cast<std::size_t>((i + 1) % 100)];
      try {
        ks.load_key(ids[static_cast<std::size_t>(i)], wrong);
      } catch (const Error& e) {
        errors += e.what();
        if (e.code() == Errc::DecryptError) ++wrong_refused;
      }
    }
    if (ks.load_key(ids[0], pass[0]) != keys[0]) return fail("round trip lost the key");
  }

  // Revocation with live sessions, then again after a restart.
  SimCluster sim;
  ClusterProfile profile;
  profile.sim = &sim;
  std::set<std::size_t> revoked;
  while (revoked.size() < 10) revoked.insert(rng() % 100);
  std::size_t refused = 0, attempts = 0;
  {
    KeyStore ks(opts);
    ConnectionManager cm(ks, profile);
    for (auto i : revoked) {
      auto h = cm.open_session(ids[i], pass[i]);
      cm.execute(h, {"qstat"});
      ks.revoke_key(ks.credential(ids[i]).fingerprint);
      ks.revoke_key(ks.credential(ids[i]).fingerprint);
      std::size_t before = sim.command_count();
      ++attempts;
      try {
        cm.execute(h, {"qstat"});
      } catch (const Error& e) {
        errors += e.what();
        if (e.code() == Errc::RevokedKey && sim.command_count() == before) ++refused;
      }
    }
  }
  {
    KeyStore ks(opts);
    ConnectionManager cm(ks, profile);
    for (auto i : revoked) {
      std::size_t before = sim.command_count();
      ++attempts;
      try {
        auto h = cm.open_session(ids[i], pass[i]);
        cm.execute(h, {"qstat"});
      } catch (const Error& e) {
        errors += e.what();
        if (e.code() == Errc::RevokedKey && sim.command_count() == before) ++refused;
      }
      ++attempts;
      try {
        cm.execute(CredentialHandle{ids[i], 1}, {"qstat"});
      } catch (const Error& e) {
        errors += e.what();
        if (sim.command_count() == before) ++refused;
      }
    }
    // an unrevoked key still works after the restart
    std::size_t other = 0;
    while (revoked.count(other)) ++other;
    cm.execute(cm.open_session(ids[other], pass[other]), {"qstat"});
  }

  std::string disk = read_file(opts.credential_file) + read_file(opts.revocation_file);
  std::size_t leaked = 0;
  for (const auto& k : keys) {
    auto body = key_body(k);
    if (leaks(disk, body) || leaks(logs.str(), body) || leaks(errors, body) ||
        disk.find(base64_encode(k)) != std::string::npos)
      ++leaked;
  }
  std::ostringstream d;
  d << "100 keys, " << leaked << " leaked, " << wrong_refused << "/100 wrong passphrases refused, "
    << refused << "/" << attempts << " revoked uses refused";
  if (leaked || wrong_refused != 100 || refused != attempts) return fail(d.str());
  return {true, d.str()};
}

// 7. job table layout ---------------------------------------------------------------

Outcome schema_layout() {
  const std::vector<std::string> expected{
      "jobId",         "jobName",         "user",           "status",        "path",
      "command",       "sourceDirectory", "outpath",        "memoryRequested", "parallel",
      "cores",         "timeAdded",       "runTime",        "timeRemaining", "currentMemory",
      "maximumMemory", "clusterNode",     "finalRunTime",   "finalStatus"};
  TempDir dir;
  JobStore store(dir / "jobs.db");
  if (store.schema_columns() != expected) return fail("schema columns differ");

  JobRecord r;
  r.job_id = 4242;
  r.job_name = "nm";
  r.user = "usr";
  r.status = JobStatus::Running;
  r.path = "/p.sh";
  r.command = "qsub x";
  r.source_directory = "/src";
  r.outpath = "/out";
  r.memory_requested = "3G";
  r.parallel = true;
  r.cores = 6;
  r.time_added = "2026-01-02T03:04:05Z";
  r.run_time = "00:00:07";
  r.time_remaining = "00:00:08";
  r.current_memory = 9;
  r.maximum_memory = 10;
  r.cluster_node = "node11";
  store.upsert_job(r);
  store.finalize_job(4242, {4242, JobStatus::Completed, Seconds{12}, 10, 0});
  const std::vector<std::string> values{"4242",     "nm",       "usr",    "5",      "/p.sh",
                                        "qsub x",   "/src",     "/out",   "3G",     "1",
                                        "6",        "2026-01-02T03:04:05Z", "00:00:07", "00:00:08",
                                        "9",        "10",       "node11", "00:00:12", "Completed"};
  std::istringstream in(csv_of(store));
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  // RFC 4180 line ends
  if (!header.empty() && header.back() == '\r') header.pop_back();
  if (!row.empty() && row.back() == '\r') row.pop_back();
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
    return s;
  };
  if (header != join(expected)) return fail("CSV header differs: " + header);
  if (row != join(values)) return fail("CSV row misplaced: " + row);
  return {true, "19 columns in order, CSV header and row aligned"};
}

// 8. regression against the normal equations ---------------------------------------

std::pair<long double, long double> normal_equations(const std::vector<Sample>& s) {
  Eigen::Matrix<long double, 2, 2> xtx = Eigen::Matrix<long double, 2, 2>::Zero();
  Eigen::Matrix<long double, 2, 1> xty = Eigen::Matrix<long double, 2, 1>::Zero();
  for (const auto& p : s) {
    Eigen::Matrix<long double, 2, 1> row(1.0L, static_cast<long double>(p.x));
    xtx += row * row.transpose();
    xty += row * static_cast<long double>(p.y);
  }
  Eigen::Matrix<long double, 2, 1> beta = xtx.fullPivLu().solve(xty);
  return {beta(1), beta(0)};
}

bool close(long double a, long double b, long double rel) {
  return std::abs(a - b) <= rel * std::max({1.0L, std::abs(a), std::abs(b)});
}

Outcome regression() {
  std::mt19937_64 rng(88);
  long double worst = 0;
  for (int t = 0; t < 100; ++t) {
    std::size_t n = std::uniform_int_distribution<std::size_t>(3, 300)(rng);
    double scale = std::pow(10.0, std::uniform_int_distribution<int>(0, 4)(rng));
    double slope = std::uniform_real_distribution<double>(-50, 50)(rng);
    double intercept = std::uniform_real_distribution<double>(-1000, 1000)(rng);
    std::normal_distribution<double> noise(0, std::uniform_real_distribution<double>(0, 100)(rng));
    std::vector<Sample> s;
    for (std::size_t i = 0; i < n; ++i) {
      double x = std::uniform_real_distribution<double>(0, scale)(rng);
      s.push_back({x, slope * x + intercept + noise(rng)});
    }
    auto model = fit_model(s);
    auto [os, oi] = normal_equations(s);
    worst = std::max({worst, std::abs(model.slope - os) / std::max(1.0L, std::abs(os)),
                      std::abs(model.intercept - oi) / std::max(1.0L, std::abs(oi))});
    if (!close(model.slope, os, 1e-9L) || !close(model.intercept, oi, 1e-9L))
      return fail("dataset " + std::to_string(t) + " off the oracle");
  }

  TempDir dir;
  JobStore store(dir / "jobs.db");
  auto rules = TagRules::from_json(R"json({"rules": [{"name": "reads",
      "pattern": "^(?<tool>[a-z]+)_(?<sample>S[0-9]+)_reads=(?<reads>[0-9]+)",
      "captures": {"tool": "tool", "sample": "sample", "reads": "reads"},
      "numericKeys": ["reads"]}]})json");
  for (JobId id = 1; id <= 20; ++id) {
    JobRecord r;
    r.job_id = id;
    r.job_name = "bwa_S" + std::to_string(id) + "_reads=" + std::to_string(id * 37);
    r.user = "alice";
    store.upsert_job(r);
    store.finalize_job(id, {id, JobStatus::Completed, Seconds{3 * id * 37 + 7}, 1000, 0});
  }
  auto built = build_models(store, rules, {"tool"}, "reads");
  auto it = std::find_if(built.models.begin(), built.models.end(), [](const RegressionModel& m) {
    return m.metric == Metric::ElapsedSeconds;
  });
  if (it == built.models.end()) return fail("no elapsed model built");
  if (!close(it->slope, 3, 1e-9L) || !close(it->intercept, 7, 1e-9L))
    return fail("planted line not recovered: slope " + std::to_string(it->slope) + " intercept " +
                std::to_string(it->intercept));
  std::ostringstream d;
  d << "100 datasets, worst relative deviation " << static_cast<double>(worst)
    << "; planted line recovered as " << it->slope << "*reads + " << it->intercept;
  return {true, d.str()};
}

// 9. per-user refresh leaves everyone else alone -------------------------------------

Outcome refresh_scope() {
  SimConfig sc;
  sc.seed = 12;
  sc.failure_rate = 0;
  sc.queue_delay_min = Seconds{5};
  sc.queue_delay_max = Seconds{5};
  sc.run_duration_min = Seconds{5000};
  sc.run_duration_max = Seconds{6000};
  GatewayConfig gc = test_gateway_config();
  gc.threshold = 1000;
  SimEnv env(sc, gc);
  std::map<JobId, std::string> owner;
  for (const std::string user : {"alice", "bob", "carol"}) {
    for (int i = 0; i < 3; ++i) owner[env.submit(user, simple_spec(user + std::to_string(i), user))] = user;
  }
  env.advance(Seconds{10});
  env.scheduler.tick(env.clock.now());
  env.scheduler.tick(env.clock.now());
  // one of bob's jobs leaves the listing before the refresh
  JobId bob_gone = 0;
  for (auto& [id, u] : owner) {
    if (u == "bob") {
      bob_gone = id;
      break;
    }
  }
  env.sim.handle_command({"qdel", std::to_string(bob_gone)}, "bob");
  env.advance(Seconds{600});

  auto before = csv_rows(env.store);
  std::map<JobId, std::map<std::string, std::string>> tags_before;
  for (auto& [id, u] : owner) tags_before[id] = env.store.tags(id);
  std::size_t since = env.sim.command_count();
  auto report = env.scheduler.refresh_user("alice", env.clock.now());
  auto after = csv_rows(env.store);
  auto log = env.sim.command_log();

  std::size_t changed = 0, foreign_cmds = 0, alice_details = 0;
  for (auto& [id, u] : owner) {
    if (u == "alice") continue;
    if (before[id] != after[id] || tags_before[id] != env.store.tags(id)) ++changed;
  }
  for (std::size_t i = since; i < log.size(); ++i) {
    const auto& argv = log[i].argv;
    if (argv.size() == 3 && (argv[1] == "-j")) {
      JobId id = std::stoll(argv[2]);
      if (owner[id] != "alice") ++foreign_cmds;
      else if (is_detail(log[i])) ++alice_details;
    }
  }
  std::size_t alice_changed = 0;
  for (auto& [id, u] : owner)
    if (u == "alice" && before[id] != after[id]) ++alice_changed;
  std::ostringstream d;
  d << changed << " foreign records changed, " << foreign_cmds << " foreign job commands, "
    << alice_details << " detail queries for alice";
  if (changed || foreign_cmds || alice_details != 3 || alice_changed != 3 || !report.errors.empty())
    return fail(d.str());
  return {true, d.str()};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"lifecycle matches simulator ledger", lifecycle},
      {"two-phase poll shape", poll_shape},
      {"throttle footprint and backoff", throttle_footprint},
      {"cache serves last dispatch", cache_semantics},
      {"adapter round trip", adapter_round_trip},
      {"key material never at rest in plaintext", key_security},
      {"job table columns", schema_layout},
      {"regression matches oracle", regression},
      {"per-user refresh scope", refresh_scope},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    failures += !o.pass;
    std::printf("%s [%zu] %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures ? 1 : 0;
}
