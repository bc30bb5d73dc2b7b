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

// clusterscope: job monitoring service and maintenance commands.

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "clusterscope/analytics.hpp"
#include "clusterscope/api_service.hpp"
#include "clusterscope/config.hpp"
#include "clusterscope/error.hpp"
#include "clusterscope/job_store.hpp"
#include "clusterscope/key_store.hpp"
#include "clusterscope/sim_cluster.hpp"

using namespace clusterscope;
using nlohmann::json;

namespace {

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::InvalidParams, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string passphrase() {
  if (auto env = process_env(std::string(kEnvPrefix) + "KEY_PASSPHRASE")) return *env;
  if (isatty(STDIN_FILENO)) std::cerr << "passphrase: " << std::flush;
  std::string line;
  std::getline(std::cin, line);
  return line;
}

KeyStore open_keys(const AppConfig& c) {
  KeyStoreOptions o;
  o.credential_file = c.credential_file;
  o.revocation_file = c.revocation_file;
  o.iterations = c.pbkdf2_iterations;
  o.min_passphrase_length = static_cast<std::size_t>(c.min_passphrase_length);
  return KeyStore(std::move(o));
}

int serve(AppConfig config) {
  KeyStore keys = open_keys(config);
  std::unique_ptr<SimCluster> sim;
  ClusterProfile profile;
  profile.transport = config.transport;
  profile.command_timeout = config.command_timeout;
  profile.known_hosts = config.known_hosts;
  if (config.transport == TransportKind::Sim) {
    sim = std::make_unique<SimCluster>(config.sim);
    profile.sim = sim.get();
  }
  ConnectionManager connections(keys, profile);

  std::string pass = passphrase();
  std::map<std::string, CredentialHandle> handles;
  for (const auto& [user, key_id] : config.user_keys) handles[user] = connections.open_session(key_id, pass);
  if (config.system_key.empty()) throw Error(Errc::InvalidParams, "credentials.system is not set");
  handles[std::string(kSystemPrincipal)] = connections.open_session(config.system_key, pass);
  std::fill(pass.begin(), pass.end(), '\0');

  JobStore store(config.db_path);
  SgeAdapter adapter;
  config.gateway.threshold_overrides[std::string(kSystemPrincipal)] = config.system_threshold;
  Gateway gateway(adapter, connections, store,
                  [&handles](std::string_view principal) {
                    auto it = handles.find(std::string(principal));
                    if (it == handles.end())
                      throw Error(Errc::Forbidden,
                                  "no cluster credential for " + std::string(principal));
                    return it->second;
                  },
                  config.gateway);
  StatusScheduler scheduler(gateway, store, config.poll);

  Authenticator auth;
  if (!config.users_file.empty())
    auth.add_provider(std::make_unique<LocalTokenProvider>(
        LocalTokenProvider::from_json(read_file(config.users_file))));
  if (!config.assertion_secret.empty())
    auth.add_provider(std::make_unique<AssertionProvider>(config.assertion_secret));
  SessionStore sessions(config.session_ttl);
  std::optional<TagRules> rules;
  if (!config.tag_rules_file.empty()) rules = TagRules::from_json(read_file(config.tag_rules_file));

  ApiConfig api_config;
  api_config.static_dir = config.static_dir;
  ApiService api(gateway, store, &scheduler, auth, sessions, std::move(rules), api_config);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  int port = api.start(config.host, config.port);
  std::cout << "listening on " << config.host << ":" << port << std::endl;
  scheduler.start();
  while (!g_stop) {
    std::this_thread::sleep_for(std::chrono::seconds(1));
    if (sim) sim->advance_clock(Seconds{1});  // simulated cluster follows wall time
  }
  scheduler.stop();
  api.stop();
  return 0;
}

int sim_run(const std::string& scenario_file, std::optional<std::uint64_t> seed) {
  auto doc = json::parse(read_file(scenario_file));
  SimConfig cfg;
  if (seed) cfg.seed = *seed;
  SimCluster sim(cfg);
  const auto start = sim.now();
  for (const auto& step : doc) {
    auto at = start + Seconds{step.value("at", std::int64_t{0})};
    if (at > sim.now()) sim.advance_clock(at - sim.now());
    if (step.contains("advance")) {
      for (const auto& t : sim.advance_clock(Seconds{step.at("advance").get<std::int64_t>()}))
        std::cout << format_iso8601(t.at) << " job " << t.job_id << " " << to_string(t.from)
                  << " -> " << to_string(t.to) << "\n";
    } else {
      auto argv = step.at("command").get<CommandLine>();
      auto r = sim.handle_command(argv, step.value("user", "sim"));
      std::cout << "$ " << shell_join(argv) << "\n" << r.stdout_text << r.stderr_text;
      if (r.exit_code != 0) std::cout << "(exit " << r.exit_code << ")\n";
    }
  }
  json ledger = json::array();
  for (const auto& j : sim.ledger()) {
    ledger.push_back({{"jobId", j.job_id},
                      {"owner", j.owner},
                      {"state", to_string(j.state)},
                      {"exitCode", j.exit_code},
                      {"wallclock", format_duration(j.wallclock())},
                      {"maxvmem", j.max_memory_until(j.wallclock())}});
  }
  std::cout << ledger.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clusterscope: batch cluster job monitoring"};
  app.require_subcommand(1);
  std::optional<std::string> config_file;
  bool verbose = false;
  app.add_option("--config", config_file, "JSON configuration file");
  app.add_flag("-v,--verbose", verbose, "debug logging");

  auto* serve_cmd = app.add_subcommand("serve", "run the poller and the HTTP API");
  std::optional<int> port;
  std::optional<std::string> transport, db;
  serve_cmd->add_option("--port", port, "listen port");
  serve_cmd->add_option("--transport", transport, "ssh, exec or sim")
      ->check(CLI::IsMember({"ssh", "exec", "sim"}));
  serve_cmd->add_option("--db", db, "job database file");

  auto* key_cmd = app.add_subcommand("key", "manage stored SSH keys");
  key_cmd->require_subcommand(1);
  auto* key_store_cmd = key_cmd->add_subcommand("store", "encrypt and store a private key");
  std::string key_user, key_host, key_file;
  int key_port = 22;
  key_store_cmd->add_option("--user", key_user, "cluster login")->required();
  key_store_cmd->add_option("--host", key_host, "cluster host")->required();
  key_store_cmd->add_option("--port", key_port, "ssh port");
  key_store_cmd->add_option("--key-file", key_file, "private key file")->required()->check(CLI::ExistingFile);
  auto* key_revoke_cmd = key_cmd->add_subcommand("revoke", "revoke a key fingerprint");
  std::string fingerprint;
  key_revoke_cmd->add_option("fingerprint", fingerprint, "SHA256:... fingerprint")->required();
  auto* key_list_cmd = key_cmd->add_subcommand("list", "list stored keys");

  auto* db_cmd = app.add_subcommand("db", "job database maintenance");
  db_cmd->require_subcommand(1);
  auto* export_cmd = db_cmd->add_subcommand("export", "write the Job table as CSV");
  std::string export_out;
  export_cmd->add_option("--out", export_out, "output file (default stdout)");
  auto* purge_cmd = db_cmd->add_subcommand("purge", "delete finished jobs added before a time");
  std::string purge_before;
  purge_cmd->add_option("--before", purge_before, "ISO-8601 UTC timestamp")->required();
  for (auto* c : {export_cmd, purge_cmd}) c->add_option("--db", db, "job database file");

  auto* an_cmd = app.add_subcommand("analytics", "tag jobs and fit resource models");
  an_cmd->require_subcommand(1);
  std::string rules_file, covariate = "reads", models_out, scatter_dir;
  std::vector<std::string> grouping{"tool"};
  auto* fit_cmd = an_cmd->add_subcommand("fit", "fit per-group least-squares models");
  auto* tag_cmd = an_cmd->add_subcommand("tag", "apply tag rules and store the tags");
  for (auto* c : {fit_cmd, tag_cmd}) {
    c->add_option("--rules", rules_file, "tag rule file")->required()->check(CLI::ExistingFile);
    c->add_option("--db", db, "job database file");
  }
  fit_cmd->add_option("--group", grouping, "tag keys that define a group");
  fit_cmd->add_option("--covariate", covariate, "numeric tag used as input size");
  fit_cmd->add_option("--out", models_out, "models CSV (default stdout)");
  fit_cmd->add_option("--scatter-dir", scatter_dir, "directory for scatter data files");

  auto* sim_cmd = app.add_subcommand("sim", "simulated cluster");
  sim_cmd->require_subcommand(1);
  auto* sim_run_cmd = sim_cmd->add_subcommand("run", "replay a scenario file");
  std::string scenario;
  std::optional<std::uint64_t> seed;
  sim_run_cmd->add_option("scenario", scenario, "JSON list of {at, command, user} or {at, advance}")
      ->required()
      ->check(CLI::ExistingFile);
  sim_run_cmd->add_option("--seed", seed, "simulator seed");

  CLI11_PARSE(app, argc, argv);
  // stdout carries command output (CSV, JSON)
  spdlog::set_default_logger(spdlog::stderr_color_mt("clusterscope"));
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (sim_run_cmd->parsed()) return sim_run(scenario, seed);

    AppConfig config = load_config(config_file ? std::optional<std::filesystem::path>(*config_file)
                                               : std::nullopt);
    if (db) config.db_path = *db;

    if (serve_cmd->parsed()) {
      if (port) config.port = *port;
      if (transport) config.transport = *transport_from_string(*transport);
      return serve(std::move(config));
    }
    if (key_store_cmd->parsed()) {
      auto keys = open_keys(config);
      auto id = keys.store_key(read_file(key_file), passphrase(), key_user, key_host, key_port);
      std::cout << id << " " << keys.credential(id).fingerprint << "\n";
      return 0;
    }
    if (key_revoke_cmd->parsed()) {
      auto list = open_keys(config).revoke_key(fingerprint);
      std::cout << list.revoked_fingerprints.size() << " revoked fingerprints\n";
      return 0;
    }
    if (key_list_cmd->parsed()) {
      auto keys = open_keys(config);
      for (const auto& c : keys.credentials()) {
        std::cout << c.key_id << " " << c.user << "@" << c.host << ":" << c.port << " "
                  << c.fingerprint << (keys.is_revoked(c.fingerprint) ? " revoked" : "") << "\n";
      }
      return 0;
    }

    JobStore store(config.db_path);
    if (export_cmd->parsed()) {
      if (export_out.empty()) {
        store.export_csv(std::cout);
      } else {
        std::ofstream out(export_out, std::ios::binary);
        store.export_csv(out);
      }
      return 0;
    }
    if (purge_cmd->parsed()) {
      auto cutoff = parse_iso8601(purge_before);
      if (!cutoff) throw Error(Errc::InvalidParams, "--before must look like 2026-01-31T00:00:00Z");
      std::cout << store.purge_finalized_before(*cutoff) << " jobs removed\n";
      return 0;
    }
    auto rules = TagRules::from_json(read_file(rules_file));
    if (tag_cmd->parsed()) {
      HistoryQuery q;
      q.allow_all = true;
      for (const auto& rec : store.list_jobs(q)) {
        auto tags = rules.tag_job(rec);
        for (const auto& w : tags.warnings) spdlog::warn("{}", w);
        if (tags.tags.empty()) continue;
        std::map<std::string, std::string> text;
        for (const auto& [k, v] : tags.tags) text[k] = tag_text(v);
        store.set_tags(rec.job_id, text);
        std::cout << rec.job_id << " " << group_label(text) << "\n";
      }
      return 0;
    }
    if (fit_cmd->parsed()) {
      auto result = build_models(store, rules, grouping, covariate);
      for (const auto& w : result.warnings) spdlog::warn("{}", w);
      for (const auto& s : result.skipped)
        spdlog::info("skipped group {} (n={}): {}", s.group, s.n, s.reason);
      if (models_out.empty()) {
        write_models_csv(std::cout, result.models);
      } else {
        std::ofstream out(models_out);
        write_models_csv(out, result.models);
      }
      if (!scatter_dir.empty()) {
        std::filesystem::create_directories(scatter_dir);
        std::ofstream elapsed(std::filesystem::path(scatter_dir) / "elapsed_hours.csv");
        write_scatter_csv(elapsed, result, covariate, Metric::ElapsedSeconds);
        std::ofstream ram(std::filesystem::path(scatter_dir) / "ram_gb.csv");
        write_scatter_csv(ram, result, covariate, Metric::MaxMemoryBytes);
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
