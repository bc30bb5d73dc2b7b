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
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "clusterscope/job_store.hpp"

namespace clusterscope {

/// Regular expression with named groups, applied to record fields in order.
struct TagRule {
  std::string name;
  std::string pattern;
  std::map<std::string, std::string> captures;  // group name -> tag key
  std::set<std::string> numeric_keys;            // tag keys parsed as numbers
  std::vector<std::string> fields{"jobName", "command", "path"};
};

using TagValue = std::variant<std::string, double>;

struct TagSet {
  JobId job_id = 0;
  std::map<std::string, TagValue> tags;
  std::vector<std::string> warnings;

  bool operator==(const TagSet&) const = default;
};

/// Compiled, validated rule list. Immutable and safe to share between threads.
class TagRules {
 public:
  /// Throws InvalidParams for a pattern that does not compile, an unknown
  /// field, a capture group missing from the pattern, or a duplicate tag key.
  explicit TagRules(std::vector<TagRule> rules);
  ~TagRules();
  TagRules(TagRules&&) noexcept;
  TagRules& operator=(TagRules&&) noexcept;

  /// {"rules": [{"name", "pattern", "captures", "numericKeys", "fields"?}]}
  static TagRules from_json(std::string_view text);

  const std::vector<TagRule>& rules() const { return rules_; }
  /// First rule to produce a tag key wins. Numeric captures that do not
  /// parse are skipped with a warning.
  TagSet tag_job(const JobRecord& record) const;

 private:
  struct Compiled;
  std::vector<TagRule> rules_;
  std::vector<std::unique_ptr<Compiled>> compiled_;
};

inline TagSet tag_job(const JobRecord& record, const TagRules& rules) {
  return rules.tag_job(record);
}

/// Decimal number with an optional K/M/G suffix (10^3, 10^6, 10^9). The
/// suffix is applied to the digit string, so "12.1M" is exactly 12100000.
std::optional<double> parse_scaled_number(std::string_view text);
/// Shortest round-trip text for a tag value.
std::string tag_text(const TagValue& value);

enum class Metric { ElapsedSeconds, MaxMemoryBytes };

std::string_view to_string(Metric metric);
std::optional<Metric> metric_from_string(std::string_view name);

struct Sample {
  double x = 0;
  double y = 0;
};

struct RegressionModel {
  std::map<std::string, std::string> tag_filter;
  std::string covariate_key;
  Metric metric = Metric::ElapsedSeconds;
  double slope = 0;
  double intercept = 0;
  std::size_t n = 0;
  double rmse = 0;
  bool fitted = false;
};

struct Estimate {
  double value = 0;
  double rmse = 0;
};

/// Ordinary least squares y = slope * x + intercept. Throws InsufficientData
/// for fewer than 2 points and DegenerateCovariate when x is constant.
RegressionModel fit_model(std::span<const Sample> samples);
/// Throws UnfittedModel. Negative estimates are clamped to 0.
Estimate predict(const RegressionModel& model, double covariate);

struct Observation {
  JobId job_id = 0;
  double covariate = 0;
  double elapsed_seconds = 0;
  double max_memory_bytes = 0;
};

struct SkipEntry {
  std::string group;
  std::size_t n = 0;
  std::string reason;
};

struct BuildResult {
  std::vector<RegressionModel> models;
  std::vector<SkipEntry> skipped;
  std::vector<std::string> warnings;
  std::map<std::string, std::vector<Observation>> observations;  // by group label
};

/// One model per (group, metric) over completed jobs, ordered by group label
/// then metric. A group is the tuple of `grouping` tag values.
BuildResult build_models(const JobStore& store, const TagRules& rules,
                         const std::vector<std::string>& grouping,
                         const std::string& covariate_key);

/// "tool=bwa" or "tool=bwa,ref=hg19".
std::string group_label(const std::map<std::string, std::string>& filter);

/// Columns group,metric,slope,intercept,n,rmse.
void write_models_csv(std::ostream& out, const std::vector<RegressionModel>& models);
/// Columns group,<covariate>,elapsed_hours or group,<covariate>,ram_gb.
void write_scatter_csv(std::ostream& out, const BuildResult& result,
                       const std::string& covariate_key, Metric metric);

}  // namespace clusterscope
