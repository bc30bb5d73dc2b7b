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

#include "clusterscope/error.hpp"

namespace clusterscope {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::UnsupportedKind: return "UnsupportedKind";
    case Errc::InvalidParams: return "InvalidParams";
    case Errc::ParseError: return "ParseError";
    case Errc::UnitError: return "UnitError";
    case Errc::NotFinished: return "NotFinished";
    case Errc::WeakPassphrase: return "WeakPassphrase";
    case Errc::StorageError: return "StorageError";
    case Errc::DecryptError: return "DecryptError";
    case Errc::RevokedKey: return "RevokedKey";
    case Errc::UnknownKey: return "UnknownKey";
    case Errc::ConnectFailure: return "ConnectFailure";
    case Errc::AuthFailure: return "AuthFailure";
    case Errc::Timeout: return "Timeout";
    case Errc::TransportError: return "TransportError";
    case Errc::FileNotFound: return "FileNotFound";
    case Errc::PermissionDenied: return "PermissionDenied";
    case Errc::ConstraintViolation: return "ConstraintViolation";
    case Errc::NotFound: return "NotFound";
    case Errc::AlreadyFinal: return "AlreadyFinal";
    case Errc::NumericParseFailure: return "NumericParseFailure";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::DegenerateCovariate: return "DegenerateCovariate";
    case Errc::UnfittedModel: return "UnfittedModel";
    case Errc::Throttled: return "Throttled";
    case Errc::Forbidden: return "Forbidden";
    case Errc::Unauthenticated: return "Unauthenticated";
    case Errc::ProviderUnavailable: return "ProviderUnavailable";
  }
  return "Unknown";
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::None: return "";
    case Stage::Render: return "Render";
    case Stage::Transport: return "Transport";
    case Stage::Parse: return "Parse";
    case Stage::Store: return "Store";
  }
  return "";
}

Error::Error(Errc code, const std::string& message, Stage stage)
    : std::runtime_error(message), code_(code), stage_(stage) {}

Error& Error::at_line(std::size_t line) {
  line_ = line;
  return *this;
}

Error& Error::with_retry_after(std::chrono::seconds retry) {
  retry_after_ = retry;
  return *this;
}

Error& Error::in_stage(Stage stage) {
  stage_ = stage;
  return *this;
}

}  // namespace clusterscope
