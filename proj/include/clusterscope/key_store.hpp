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
#include <map>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "clusterscope/time.hpp"

namespace clusterscope {

/// A stored SSH private key. `encrypted_key` is nonce || ciphertext || tag.
struct Credential {
  int version = 1;
  std::string key_id;
  std::string user;
  std::string host;
  int port = 22;
  std::string salt;           // raw bytes
  int iterations = 0;
  std::string cipher;         // "aes-256-gcm"
  std::string encrypted_key;  // raw bytes
  std::string fingerprint;    // "SHA256:<base64>"
};

struct RevocationList {
  std::set<std::string> revoked_fingerprints;
  Timestamp updated_at{};
};

struct KeyStoreOptions {
  std::filesystem::path credential_file;
  std::filesystem::path revocation_file;
  int iterations = 200'000;
  std::size_t min_passphrase_length = 8;
  Clock clock = system_now;
};

/// Encrypted key material at rest plus the fingerprint revocation list.
///
/// Keys are encrypted with AES-256-GCM under a key derived by PBKDF2-HMAC-SHA256
/// from the user's passphrase and a fresh 16-byte salt. The credential's
/// metadata is bound as associated data, so a wrong passphrase or an edited
/// record fails authentication instead of yielding wrong bytes.
///
/// Writes are serialized; reads run concurrently.
class KeyStore {
 public:
  static constexpr int kMinIterations = 100'000;
  static constexpr std::size_t kSaltBytes = 16;

  explicit KeyStore(KeyStoreOptions options);

  /// Returns the new key id. Throws WeakPassphrase, InvalidParams or StorageError.
  std::string store_key(std::string_view plaintext_key, std::string_view passphrase,
                        std::string user, std::string host, int port);
  /// Throws UnknownKey, RevokedKey or DecryptError.
  std::string load_key(std::string_view key_id, std::string_view passphrase) const;
  /// Idempotent; unknown fingerprints are recorded as well.
  RevocationList revoke_key(std::string_view fingerprint);

  bool is_revoked(std::string_view fingerprint) const;
  RevocationList revocation_list() const;
  /// Throws UnknownKey.
  Credential credential(std::string_view key_id) const;
  std::vector<Credential> credentials() const;

 private:
  void load_files();
  void persist_credentials() const;

  KeyStoreOptions options_;
  mutable std::shared_mutex mu_;
  std::map<std::string, Credential, std::less<>> credentials_;
  RevocationList revocations_;
};

/// OpenSSH-compatible "SHA256:..." fingerprint. For openssh-key-v1 private keys
/// the embedded public key is hashed (matching `ssh-keygen -l`); other blobs
/// fall back to a domain-separated digest of the key bytes.
std::string key_fingerprint(std::string_view private_key);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

}  // namespace clusterscope
