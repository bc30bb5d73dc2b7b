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
#include <memory>
#include <string>

#include "clusterscope/types.hpp"

namespace clusterscope {

class SimCluster;

/// Runs one command line somewhere and captures its output.
class Transport {
 public:
  virtual ~Transport() = default;
  /// Throws Error(Timeout), Error(ConnectFailure), Error(AuthFailure) or
  /// Error(TransportError). A nonzero exit status is not an error here.
  virtual ExecResult run(const CommandLine& argv, Seconds timeout) = 0;
};

/// Local process execution without a shell.
class ExecTransport final : public Transport {
 public:
  ExecResult run(const CommandLine& argv, Seconds timeout) override;
};

/// Commands applied to an in-process simulator as `user`.
class SimTransport final : public Transport {
 public:
  SimTransport(SimCluster& sim, std::string user) : sim_(sim), user_(std::move(user)) {}
  ExecResult run(const CommandLine& argv, Seconds timeout) override;

 private:
  SimCluster& sim_;
  std::string user_;
};

struct SshTarget {
  std::string user;
  std::string host;
  int port = 22;
  std::filesystem::path known_hosts;
};

/// OpenSSH client. The private key is written to a 0600 file inside a
/// private temporary directory for the lifetime of one command.
class SshTransport final : public Transport {
 public:
  SshTransport(SshTarget target, std::string private_key)
      : target_(std::move(target)), private_key_(std::move(private_key)) {}
  ~SshTransport() override;

  ExecResult run(const CommandLine& argv, Seconds timeout) override;
  /// ssh argv for a remote command, with `identity` as the key path.
  CommandLine ssh_argv(const CommandLine& remote, const std::string& identity,
                       Seconds timeout) const;

 private:
  SshTarget target_;
  std::string private_key_;
};

/// POSIX sh quoting: the result is read back by the shell as exactly one word.
std::string shell_quote(std::string_view word);
/// Space-joined shell_quote of every token.
std::string shell_join(const CommandLine& argv);

}  // namespace clusterscope
