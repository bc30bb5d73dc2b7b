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

#include "clusterscope/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <json.hpp>

#include "clusterscope/error.hpp"

namespace clusterscope {

namespace {

using nlohmann::json;
using Setter = std::function<void(AppConfig&, const json&)>;

template <class T>
Setter field(T AppConfig::*member) {
  return [member](AppConfig& c, const json& v) { c.*member = v.get<T>(); };
}

Setter seconds(Seconds AppConfig::*member) {
  return [member](AppConfig& c, const json& v) { c.*member = Seconds{v.get<std::int64_t>()}; };
}

template <class F>
Setter custom(F f) {
  return Setter(f);
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"db.path", field(&AppConfig::db_path)},
      {"keys.credential_file", field(&AppConfig::credential_file)},
      {"keys.revocation_file", field(&AppConfig::revocation_file)},
      {"keys.pbkdf2_iterations", field(&AppConfig::pbkdf2_iterations)},
      {"keys.min_passphrase_length", field(&AppConfig::min_passphrase_length)},
      {"cluster.transport", custom([](AppConfig& c, const json& v) {
         auto t = transport_from_string(v.get<std::string>());
         if (!t) throw Error(Errc::InvalidParams, "cluster.transport must be ssh, exec or sim");
         c.transport = *t;
       })},
      {"cluster.command_timeout_seconds", seconds(&AppConfig::command_timeout)},
      {"cluster.known_hosts", field(&AppConfig::known_hosts)},
      {"credentials.users", field(&AppConfig::user_keys)},
      {"credentials.system", field(&AppConfig::system_key)},
      {"limiter.threshold", custom([](AppConfig& c, const json& v) { c.gateway.threshold = v.get<int>(); })},
      {"limiter.window_seconds", custom([](AppConfig& c, const json& v) { c.gateway.window = Seconds{v.get<int>()}; })},
      {"limiter.backoff_base_seconds", custom([](AppConfig& c, const json& v) { c.gateway.backoff_base = Seconds{v.get<int>()}; })},
      {"limiter.backoff_cap_seconds", custom([](AppConfig& c, const json& v) { c.gateway.backoff_cap = Seconds{v.get<int>()}; })},
      {"limiter.system_threshold", field(&AppConfig::system_threshold)},
      {"cache.ttl_seconds", custom([](AppConfig& c, const json& v) { c.gateway.cache_ttl = Seconds{v.get<int>()}; })},
      {"poll.interval_seconds", custom([](AppConfig& c, const json& v) { c.poll.interval = Seconds{v.get<int>()}; })},
      {"poll.detail_batch_limit", custom([](AppConfig& c, const json& v) { c.poll.detail_batch_limit = v.get<int>(); })},
      {"poll.retry_bound", custom([](AppConfig& c, const json& v) { c.poll.retry_bound = v.get<int>(); })},
      {"poll.enabled", custom([](AppConfig& c, const json& v) { c.poll.enabled = v.get<bool>(); })},
      {"api.host", field(&AppConfig::host)},
      {"api.port", field(&AppConfig::port)},
      {"api.session_ttl_seconds", seconds(&AppConfig::session_ttl)},
      {"api.static_dir", field(&AppConfig::static_dir)},
      {"auth.users_file", field(&AppConfig::users_file)},
      {"auth.assertion_secret", field(&AppConfig::assertion_secret)},
      {"analytics.rules_file", field(&AppConfig::tag_rules_file)},
      {"sim.seed", custom([](AppConfig& c, const json& v) { c.sim.seed = v.get<std::uint64_t>(); })},
      {"sim.failure_rate", custom([](AppConfig& c, const json& v) { c.sim.failure_rate = v.get<double>(); })},
      {"sim.accounting_lag", custom([](AppConfig& c, const json& v) { c.sim.accounting_lag = v.get<int>(); })},
      {"sim.queue_delay_max_seconds", custom([](AppConfig& c, const json& v) { c.sim.queue_delay_max = Seconds{v.get<int>()}; })},
      {"sim.run_duration_max_seconds", custom([](AppConfig& c, const json& v) { c.sim.run_duration_max = Seconds{v.get<int>()}; })},
  };
  return table;
}

void flatten(const json& j, const std::string& prefix, std::map<std::string, json>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    // credentials.users is a map value, not a section
    if (it->is_object() && !setters().count(key)) {
      flatten(*it, key, out);
    } else {
      out[key] = *it;
    }
  }
}

void apply(AppConfig& c, const std::string& key, const json& value, const std::string& origin) {
  auto it = setters().find(key);
  if (it == setters().end()) throw Error(Errc::InvalidParams, origin + ": unknown key " + key);
  try {
    it->second(c, value);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidParams, origin + ": bad value for " + key + ": " + e.what());
  }
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [k, s] : setters()) out.push_back(k);
  return out;
}

std::string env_name(std::string_view key) {
  std::string out(kEnvPrefix);
  for (char c : key) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v) return std::nullopt;
  return std::string(v);
}

AppConfig load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env) {
  AppConfig c;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw Error(Errc::InvalidParams, "cannot read config " + file->string());
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(Errc::InvalidParams, "config " + file->string() + ": " + e.what());
    }
    std::map<std::string, json> flat;
    flatten(doc, "", flat);
    for (const auto& [k, v] : flat) apply(c, k, v, file->string());
  }
  for (const auto& key : config_keys()) {
    auto name = env_name(key);
    auto raw = env(name);
    if (!raw) continue;
    // JSON if it parses (numbers, booleans, objects), otherwise a plain string
    json value = json::parse(*raw, nullptr, false);
    if (value.is_discarded() || value.is_string()) {
      apply(c, key, json(*raw), name);
      continue;
    }
    try {
      apply(c, key, value, name);
    } catch (const Error&) {
      apply(c, key, json(*raw), name);  // e.g. a path that happens to look numeric
    }
  }
  return c;
}

}  // namespace clusterscope
