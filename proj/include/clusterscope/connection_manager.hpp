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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clusterscope/key_store.hpp"
#include "clusterscope/transport.hpp"
#include "clusterscope/types.hpp"

namespace clusterscope {

class SimCluster;

enum class TransportKind { Ssh, Exec, Sim };

std::string_view to_string(TransportKind kind);
std::optional<TransportKind> transport_from_string(std::string_view name);

struct ClusterProfile {
  std::string name = "default";
  TransportKind transport = TransportKind::Sim;
  Seconds command_timeout{30};
  std::filesystem::path known_hosts;
  SimCluster* sim = nullptr;  // required for TransportKind::Sim
};

/// Opaque reference to an unlocked credential. Holds no key material.
struct CredentialHandle {
  std::string key_id;
  std::uint64_t session = 0;

  bool operator==(const CredentialHandle&) const = default;
};

/// Executes command lines against the cluster on behalf of stored credentials.
///
/// Revocation is checked at the start of every call, so a key revoked while
/// a session is open stops working on its next command.
class ConnectionManager {
 public:
  using TransportFactory =
      std::function<std::unique_ptr<Transport>(const Credential&, const CredentialHandle&)>;

  ConnectionManager(KeyStore& keys, ClusterProfile profile);

  /// Verifies the passphrase against the stored key. Throws UnknownKey,
  /// RevokedKey or DecryptError.
  CredentialHandle open_session(std::string_view key_id, std::string_view passphrase);
  void close_session(const CredentialHandle& handle);

  /// A nonzero exit status is returned, not thrown.
  ExecResult execute(const CredentialHandle& handle, const CommandLine& argv);
  /// Last `n_lines` lines of a remote file. Throws FileNotFound or PermissionDenied.
  std::vector<std::string> tail_file(const CredentialHandle& handle, const std::string& path,
                                     int n_lines);

  const ClusterProfile& profile() const { return profile_; }
  KeyStore& keys() { return keys_; }
  /// Replaces transport construction, e.g. to inject faults in tests.
  void set_transport_factory(TransportFactory factory);

 private:
  struct Session {
    std::string key_id;
    std::string passphrase;
  };

  std::unique_ptr<Transport> make_transport(const Credential& cred, const CredentialHandle& handle,
                                            const Session& session);

  KeyStore& keys_;
  ClusterProfile profile_;
  std::mutex mu_;
  std::map<std::uint64_t, Session> sessions_;
  TransportFactory factory_;
};

/// `tail -v` over several files in one command. `lines` empty means whole files.
CommandLine render_fetch(std::span<const std::string> paths, std::optional<int> lines);

/// Splits `tail -v` output back into per-file lines. Files tail could not
/// read are absent from the result.
std::map<std::string, std::vector<std::string>> split_fetch_output(
    std::string_view text, std::span<const std::string> paths);

/// Lines of `text`; a trailing newline does not start an extra empty line.
std::vector<std::string> text_lines(std::string_view text);

}  // namespace clusterscope
