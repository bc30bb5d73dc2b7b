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

#include "clusterscope/connection_manager.hpp"

#include <openssl/rand.h>
#include <spdlog/spdlog.h>

#include "clusterscope/error.hpp"
#include "clusterscope/sim_cluster.hpp"

namespace clusterscope {

std::string_view to_string(TransportKind kind) {
  switch (kind) {
    case TransportKind::Ssh: return "ssh";
    case TransportKind::Exec: return "exec";
    case TransportKind::Sim: return "sim";
  }
  return "?";
}

std::optional<TransportKind> transport_from_string(std::string_view name) {
  if (name == "ssh") return TransportKind::Ssh;
  if (name == "exec") return TransportKind::Exec;
  if (name == "sim") return TransportKind::Sim;
  return std::nullopt;
}

ConnectionManager::ConnectionManager(KeyStore& keys, ClusterProfile profile)
    : keys_(keys), profile_(std::move(profile)) {
  if (profile_.transport == TransportKind::Sim && profile_.sim == nullptr)
    throw Error(Errc::InvalidParams, "sim transport needs a simulator");
  if (profile_.command_timeout <= Seconds{0})
    throw Error(Errc::InvalidParams, "command timeout must be positive");
}

CredentialHandle ConnectionManager::open_session(std::string_view key_id,
                                                 std::string_view passphrase) {
  // Decrypt once to check the passphrase; the plaintext is dropped here.
  {
    std::string key = keys_.load_key(key_id, passphrase);
    std::fill(key.begin(), key.end(), '\0');
  }
  std::uint64_t id = 0;
  std::lock_guard lock(mu_);
  do {
    RAND_bytes(reinterpret_cast<unsigned char*>(&id), sizeof id);
  } while (id == 0 || sessions_.count(id));
  sessions_[id] = Session{std::string(key_id), std::string(passphrase)};
  spdlog::info("session opened for key {}", key_id);
  return CredentialHandle{std::string(key_id), id};
}

void ConnectionManager::close_session(const CredentialHandle& handle) {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(handle.session);
  if (it == sessions_.end()) return;
  std::fill(it->second.passphrase.begin(), it->second.passphrase.end(), '\0');
  sessions_.erase(it);
}

void ConnectionManager::set_transport_factory(TransportFactory factory) {
  std::lock_guard lock(mu_);
  factory_ = std::move(factory);
}

std::unique_ptr<Transport> ConnectionManager::make_transport(const Credential& cred,
                                                             const CredentialHandle& handle,
                                                             const Session& session) {
  if (factory_) return factory_(cred, handle);
  switch (profile_.transport) {
    case TransportKind::Sim: return std::make_unique<SimTransport>(*profile_.sim, cred.user);
    case TransportKind::Exec: return std::make_unique<ExecTransport>();
    case TransportKind::Ssh:
      return std::make_unique<SshTransport>(
          SshTarget{cred.user, cred.host, cred.port, profile_.known_hosts},
          keys_.load_key(cred.key_id, session.passphrase));
  }
  throw Error(Errc::InvalidParams, "unknown transport");
}

ExecResult ConnectionManager::execute(const CredentialHandle& handle, const CommandLine& argv) {
  if (argv.empty()) throw Error(Errc::InvalidParams, "empty command line");
  Session session;
  {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(handle.session);
    if (it == sessions_.end() || it->second.key_id != handle.key_id)
      throw Error(Errc::AuthFailure, "no open session for key " + handle.key_id);
    session = it->second;
  }
  Credential cred = keys_.credential(handle.key_id);
  if (keys_.is_revoked(cred.fingerprint))
    throw Error(Errc::RevokedKey, "key " + cred.key_id + " has a revoked fingerprint");
  std::unique_ptr<Transport> transport;
  {
    std::lock_guard lock(mu_);
    transport = make_transport(cred, handle, session);
  }
  std::fill(session.passphrase.begin(), session.passphrase.end(), '\0');
  spdlog::debug("exec {} as {}@{}", argv.front(), cred.user, cred.host);
  return transport->run(argv, profile_.command_timeout);
}

std::vector<std::string> ConnectionManager::tail_file(const CredentialHandle& handle,
                                                      const std::string& path, int n_lines) {
  if (n_lines < 1) throw Error(Errc::InvalidParams, "line count must be at least 1");
  if (path.empty()) throw Error(Errc::InvalidParams, "empty path");
  auto r = execute(handle, {"tail", "-n", std::to_string(n_lines), path});
  if (r.exit_code != 0) {
    if (r.stderr_text.find("No such file") != std::string::npos)
      throw Error(Errc::FileNotFound, path + " does not exist");
    if (r.stderr_text.find("Permission denied") != std::string::npos)
      throw Error(Errc::PermissionDenied, path + " is not readable");
    throw Error(Errc::TransportError, "tail exited with status " + std::to_string(r.exit_code));
  }
  return text_lines(r.stdout_text);
}

std::vector<std::string> text_lines(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      out.emplace_back(text.substr(pos));
      break;
    }
    out.emplace_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return out;
}

CommandLine render_fetch(std::span<const std::string> paths, std::optional<int> lines) {
  if (paths.empty()) throw Error(Errc::InvalidParams, "no files to fetch");
  if (lines && *lines < 1) throw Error(Errc::InvalidParams, "line count must be at least 1");
  CommandLine argv{"tail", "-v", "-n", lines ? std::to_string(*lines) : "+1"};
  for (const auto& p : paths) {
    if (p.empty()) throw Error(Errc::InvalidParams, "empty path");
    argv.push_back(p);
  }
  return argv;
}

std::map<std::string, std::vector<std::string>> split_fetch_output(
    std::string_view text, std::span<const std::string> paths) {
  std::map<std::string, std::vector<std::string>> out;
  auto header = [](const std::string& p) { return "==> " + p + " <==\n"; };
  std::size_t pos = 0;
  std::size_t next_path = 0;
  bool first = true;
  while (pos < text.size() && next_path < paths.size()) {
    // Find which remaining path's header starts here.
    std::optional<std::size_t> which;
    std::size_t body = 0;
    for (std::size_t i = next_path; i < paths.size(); ++i) {
      std::string h = (first ? "" : "\n") + header(paths[i]);
      if (text.substr(pos).starts_with(h)) {
        which = i;
        body = pos + h.size();
        break;
      }
    }
    if (!which) throw Error(Errc::ParseError, "unexpected tail output");
    // Its content runs up to the next later header.
    std::size_t end = text.size();
    std::size_t end_path = paths.size();
    for (std::size_t j = *which + 1; j < paths.size(); ++j) {
      auto at = text.find("\n" + header(paths[j]), body);
      if (at != std::string_view::npos && at < end) {
        end = at;
        end_path = j;
      }
    }
    out[paths[*which]] = text_lines(text.substr(body, end - body));
    pos = end;
    next_path = end_path < paths.size() ? *which + 1 : paths.size();
    first = false;
  }
  return out;
}

}  // namespace clusterscope
