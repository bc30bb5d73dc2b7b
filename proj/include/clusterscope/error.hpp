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

#include <chrono>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace clusterscope {

/// Every failure the library reports carries one of these codes. Callers
/// branch on the code, never on the message text.
enum class Errc {
  // scheduler adapter
  UnsupportedKind,
  InvalidParams,
  ParseError,
  UnitError,
  NotFinished,
  // connection manager
  WeakPassphrase,
  StorageError,
  DecryptError,
  RevokedKey,
  UnknownKey,
  ConnectFailure,
  AuthFailure,
  Timeout,
  TransportError,
  FileNotFound,
  PermissionDenied,
  // job store
  ConstraintViolation,
  NotFound,
  AlreadyFinal,
  // analytics
  NumericParseFailure,
  InsufficientData,
  DegenerateCovariate,
  UnfittedModel,
  // gateway and api
  Throttled,
  Forbidden,
  Unauthenticated,
  ProviderUnavailable,
};

/// Pipeline stage a dispatch failure came from.
enum class Stage { None, Render, Transport, Parse, Store };

std::string_view to_string(Errc code);
std::string_view to_string(Stage stage);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, Stage stage = Stage::None);

  Errc code() const noexcept { return code_; }
  Stage stage() const noexcept { return stage_; }
  /// 1-based input line for parse failures.
  std::optional<std::size_t> line() const noexcept { return line_; }
  /// Set for Throttled.
  std::optional<std::chrono::seconds> retry_after() const noexcept { return retry_after_; }

  Error& at_line(std::size_t line);
  Error& with_retry_after(std::chrono::seconds retry);
  Error& in_stage(Stage stage);

 private:
  Errc code_;
  Stage stage_;
  std::optional<std::size_t> line_;
  std::optional<std::chrono::seconds> retry_after_;
};

}  // namespace clusterscope
