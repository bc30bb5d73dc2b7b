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

#include "clusterscope/auth.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>

#include <charconv>
#include <json.hpp>

#include "clusterscope/error.hpp"

namespace clusterscope {

namespace {

std::string hex(const unsigned char* p, std::size_t n) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    out += kDigits[p[i] >> 4];
    out += kDigits[p[i] & 15];
  }
  return out;
}

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  return hex(md, len);
}

bool equal_ct(std::string_view a, std::string_view b) {
  return a.size() == b.size() && CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

}  // namespace

void LocalTokenProvider::add_user(const std::string& user, std::string_view token, bool admin) {
  if (user.empty() || token.empty()) throw Error(Errc::InvalidParams, "user and token required");
  users_[user] = Entry{sha256_hex(token), admin};
}

LocalTokenProvider LocalTokenProvider::from_json(std::string_view text) {
  LocalTokenProvider p;
  try {
    auto doc = nlohmann::json::parse(text);
    for (const auto& u : doc.at("users")) {
      p.users_[u.at("user").get<std::string>()] =
          Entry{u.at("tokenSha256").get<std::string>(), u.value("admin", false)};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidParams, std::string("user file: ") + e.what());
  }
  return p;
}

Identity LocalTokenProvider::authenticate(const LoginCredentials& c) const {
  auto it = users_.find(c.user);
  // hash even for unknown users so timing does not reveal which names exist
  auto digest = sha256_hex(c.token);
  if (it == users_.end() || c.token.empty() || !equal_ct(digest, it->second.token_digest))
    throw Error(Errc::AuthFailure, "invalid user or token");
  return Identity{c.user, it->second.admin};
}

std::string AssertionProvider::sign(std::string_view secret, std::string_view principal,
                                    Timestamp expiry) {
  std::string body = std::string(principal) + "." +
                     std::to_string(expiry.time_since_epoch().count());
  unsigned char mac[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  HMAC(EVP_sha256(), secret.data(), static_cast<int>(secret.size()),
       reinterpret_cast<const unsigned char*>(body.data()), body.size(), mac, &len);
  return body + "." + hex(mac, len);
}

Identity AssertionProvider::authenticate(const LoginCredentials& c) const {
  if (secret_.empty()) throw Error(Errc::ProviderUnavailable, "assertion provider has no secret");
  const auto& a = c.assertion;
  auto last = a.rfind('.');
  auto mid = last == std::string::npos || last == 0 ? std::string::npos : a.rfind('.', last - 1);
  if (mid == std::string::npos || mid == 0) throw Error(Errc::AuthFailure, "malformed assertion");
  std::string principal = a.substr(0, mid);
  std::string expiry_text = a.substr(mid + 1, last - mid - 1);
  std::int64_t expiry = 0;
  auto [ptr, ec] =
      std::from_chars(expiry_text.data(), expiry_text.data() + expiry_text.size(), expiry);
  if (ec != std::errc{} || ptr != expiry_text.data() + expiry_text.size())
    throw Error(Errc::AuthFailure, "malformed assertion");
  auto expected = sign(secret_, principal, Timestamp{Seconds{expiry}});
  if (!equal_ct(expected, a)) throw Error(Errc::AuthFailure, "assertion signature mismatch");
  if (clock_() >= Timestamp{Seconds{expiry}}) throw Error(Errc::AuthFailure, "assertion expired");
  return Identity{principal, false};
}

SessionStore::SessionStore(Seconds ttl, Clock clock) : ttl_(ttl), clock_(std::move(clock)) {
  if (ttl_ <= Seconds{0}) throw Error(Errc::InvalidParams, "session ttl must be positive");
}

Session SessionStore::issue(const Identity& identity) {
  unsigned char raw[32];
  if (RAND_bytes(raw, sizeof raw) != 1) throw Error(Errc::ProviderUnavailable, "no randomness");
  Session s;
  s.token = hex(raw, sizeof raw);
  s.principal = identity.principal;
  s.admin = identity.admin;
  s.issued_at = clock_();
  s.expires_at = s.issued_at + ttl_;
  std::unique_lock lock(mu_);
  auto now = s.issued_at;
  std::erase_if(sessions_, [&](const auto& kv) { return kv.second.expires_at <= now; });
  sessions_[s.token] = s;
  return s;
}

Session SessionStore::validate(std::string_view token) const {
  std::shared_lock lock(mu_);
  auto it = sessions_.find(token);
  if (token.empty() || it == sessions_.end())
    throw Error(Errc::Unauthenticated, "missing or unknown session token");
  if (clock_() >= it->second.expires_at) throw Error(Errc::Unauthenticated, "session expired");
  return it->second;
}

void SessionStore::revoke(std::string_view token) {
  std::unique_lock lock(mu_);
  auto it = sessions_.find(token);
  if (it != sessions_.end()) sessions_.erase(it);
}

std::size_t SessionStore::size() const {
  std::shared_lock lock(mu_);
  return sessions_.size();
}

void Authenticator::add_provider(std::unique_ptr<AuthProvider> provider) {
  std::string name(provider->name());
  providers_[name] = std::move(provider);
}

bool Authenticator::has_provider(std::string_view name) const {
  return providers_.find(name) != providers_.end();
}

Identity Authenticator::authenticate(std::string_view provider,
                                     const LoginCredentials& credentials) const {
  auto it = providers_.find(provider);
  if (it == providers_.end())
    throw Error(Errc::ProviderUnavailable, "no auth provider named " + std::string(provider));
  return it->second->authenticate(credentials);
}

}  // namespace clusterscope
