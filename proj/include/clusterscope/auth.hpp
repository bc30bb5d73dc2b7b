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

#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <string_view>

#include "clusterscope/time.hpp"

namespace clusterscope {

struct Identity {
  std::string principal;
  bool admin = false;
};

struct Session {
  std::string token;
  std::string principal;
  bool admin = false;
  Timestamp issued_at{};
  Timestamp expires_at{};
};

/// Fields a login request may carry; each provider reads the ones it needs.
struct LoginCredentials {
  std::string user;
  std::string token;
  std::string assertion;
};

class AuthProvider {
 public:
  virtual ~AuthProvider() = default;
  virtual std::string_view name() const = 0;
  /// Throws AuthFailure or ProviderUnavailable.
  virtual Identity authenticate(const LoginCredentials& credentials) const = 0;
};

/// Users with pre-shared tokens; only SHA-256 digests of the tokens are kept.
class LocalTokenProvider final : public AuthProvider {
 public:
  std::string_view name() const override { return "local"; }
  Identity authenticate(const LoginCredentials& credentials) const override;

  void add_user(const std::string& user, std::string_view token, bool admin = false);
  /// {"users": [{"user", "tokenSha256", "admin"?}]}
  static LocalTokenProvider from_json(std::string_view text);

 private:
  struct Entry {
    std::string token_digest;
    bool admin = false;
  };
  std::map<std::string, Entry> users_;
};

/// Identity asserted by an external login bridge as
/// "<principal>.<expiry unix seconds>.<hex HMAC-SHA256 over principal.expiry>".
class AssertionProvider final : public AuthProvider {
 public:
  AssertionProvider(std::string shared_secret, Clock clock = system_now)
      : secret_(std::move(shared_secret)), clock_(std::move(clock)) {}
  std::string_view name() const override { return "assertion"; }
  Identity authenticate(const LoginCredentials& credentials) const override;

  /// Builds an assertion; used by bridges and tests.
  static std::string sign(std::string_view secret, std::string_view principal, Timestamp expiry);

 private:
  std::string secret_;
  Clock clock_;
};

/// Issued bearer tokens. Tokens are 256-bit random values in hex.
class SessionStore {
 public:
  explicit SessionStore(Seconds ttl = Seconds{8 * 3600}, Clock clock = system_now);

  Session issue(const Identity& identity);
  /// Throws Unauthenticated for unknown or expired tokens.
  Session validate(std::string_view token) const;
  void revoke(std::string_view token);
  std::size_t size() const;

 private:
  Seconds ttl_;
  Clock clock_;
  mutable std::shared_mutex mu_;
  std::map<std::string, Session, std::less<>> sessions_;
};

class Authenticator {
 public:
  void add_provider(std::unique_ptr<AuthProvider> provider);
  /// Throws ProviderUnavailable for an unknown provider name.
  Identity authenticate(std::string_view provider, const LoginCredentials& credentials) const;
  bool has_provider(std::string_view name) const;

 private:
  std::map<std::string, std::unique_ptr<AuthProvider>, std::less<>> providers_;
};

}  // namespace clusterscope
