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

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clusterscope/connection_manager.hpp"
#include "clusterscope/gateway.hpp"
#include "clusterscope/sim_cluster.hpp"
#include "clusterscope/status_scheduler.hpp"

namespace clusterscope {

inline constexpr std::string_view kEnvPrefix = "CLUSTERSCOPE_";

struct AppConfig {
  std::string db_path = "clusterscope.db";
  std::string credential_file = "credentials.json";
  std::string revocation_file = "revoked-fingerprints.txt";
  int pbkdf2_iterations = 200'000;
  int min_passphrase_length = 8;

  TransportKind transport = TransportKind::Sim;
  Seconds command_timeout{30};
  std::string known_hosts;
  /// Key ids commands run with: one per cluster login, plus the poller's.
  std::map<std::string, std::string> user_keys;
  std::string system_key;

  GatewayConfig gateway;
  int system_threshold = 30;
  PollConfig poll;

  std::string host = "127.0.0.1";
  int port = 8080;
  Seconds session_ttl{8 * 3600};
  std::string static_dir;
  std::string users_file;
  std::string assertion_secret;
  std::string tag_rules_file;

  SimConfig sim;
};

/// Every recognised dotted key, e.g. "limiter.threshold".
std::vector<std::string> config_keys();

/// "limiter.threshold" -> "CLUSTERSCOPE_LIMITER_THRESHOLD".
std::string env_name(std::string_view key);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
std::optional<std::string> process_env(const std::string& name);

/// Defaults, then the JSON file (nested objects or dotted keys), then
/// environment overrides. Unknown keys and bad values throw InvalidParams.
AppConfig load_config(const std::optional<std::filesystem::path>& file,
                      const EnvLookup& env = process_env);

}  // namespace clusterscope
