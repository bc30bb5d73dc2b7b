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

#include "clusterscope/analytics.hpp"

#include <boost/regex.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "clusterscope/error.hpp"

namespace clusterscope {

struct TagRules::Compiled {
  boost::regex re;
};

namespace {

const std::set<std::string> kFields{"jobName", "command", "path"};

const std::string& field_of(const JobRecord& r, const std::string& name) {
  if (name == "jobName") return r.job_name;
  if (name == "command") return r.command;
  return r.path;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

TagRules::TagRules(std::vector<TagRule> rules) : rules_(std::move(rules)) {
  for (const auto& rule : rules_) {
    auto bad = [&](const std::string& why) {
      return Error(Errc::InvalidParams, "tag rule '" + rule.name + "': " + why);
    };
    auto c = std::make_unique<Compiled>();
    try {
      c->re = boost::regex(rule.pattern, boost::regex::perl);
    } catch (const boost::regex_error& e) {
      throw bad(std::string("pattern does not compile: ") + e.what());
    }
    if (rule.fields.empty()) throw bad("no fields");
    for (const auto& f : rule.fields)
      if (!kFields.count(f)) throw bad("unknown field " + f);
    std::set<std::string> keys;
    for (const auto& [group, key] : rule.captures) {
      if (c->re.mark_count() == 0 ||
          (rule.pattern.find("(?<" + group + ">") == std::string::npos &&
           rule.pattern.find("(?P<" + group + ">") == std::string::npos))
        throw bad("no capture group named " + group);
      if (!keys.insert(key).second) throw bad("tag key " + key + " captured twice");
    }
    for (const auto& k : rule.numeric_keys)
      if (!keys.count(k)) throw bad("numeric key " + k + " is not captured");
    compiled_.push_back(std::move(c));
  }
}

TagRules::~TagRules() = default;
TagRules::TagRules(TagRules&&) noexcept = default;
TagRules& TagRules::operator=(TagRules&&) noexcept = default;

TagRules TagRules::from_json(std::string_view text) {
  std::vector<TagRule> rules;
  try {
    auto doc = nlohmann::json::parse(text);
    for (const auto& j : doc.at("rules")) {
      TagRule r;
      r.name = j.at("name").get<std::string>();
      r.pattern = j.at("pattern").get<std::string>();
      r.captures = j.at("captures").get<std::map<std::string, std::string>>();
      if (j.contains("numericKeys")) r.numeric_keys = j.at("numericKeys").get<std::set<std::string>>();
      if (j.contains("fields")) r.fields = j.at("fields").get<std::vector<std::string>>();
      rules.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidParams, std::string("tag rule file: ") + e.what());
  }
  return TagRules(std::move(rules));
}

TagSet TagRules::tag_job(const JobRecord& record) const {
  TagSet out;
  out.job_id = record.job_id;
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const auto& rule = rules_[i];
    for (const auto& field : rule.fields) {
      const std::string& text = field_of(record, field);
      boost::smatch m;
      if (!boost::regex_search(text, m, compiled_[i]->re)) continue;
      for (const auto& [group, key] : rule.captures) {
        if (out.tags.count(key)) continue;
        const auto& sub = m[group];
        if (!sub.matched) continue;
        std::string value = sub.str();
        if (rule.numeric_keys.count(key)) {
          auto number = parse_scaled_number(value);
          if (!number) {
            out.warnings.push_back("job " + std::to_string(record.job_id) + ": rule '" + rule.name +
                                   "' captured non-numeric " + key + "='" + value + "'");
            continue;
          }
          out.tags.emplace(key, *number);
        } else {
          out.tags.emplace(key, std::move(value));
        }
      }
      break;  // first matching field of a rule
    }
  }
  return out;
}

std::optional<double> parse_scaled_number(std::string_view text) {
  if (text.empty()) return std::nullopt;
  int shift = 0;
  switch (text.back()) {
    case 'k': case 'K': shift = 3; break;
    case 'm': case 'M': shift = 6; break;
    case 'g': case 'G': shift = 9; break;
    default: break;
  }
  if (shift) text.remove_suffix(1);
  auto dot = text.find('.');
  std::string_view whole = text.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  auto digits = [](std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (whole.empty() || !digits(whole) || !digits(frac) ||
      (dot != std::string_view::npos && frac.empty()))
    return std::nullopt;
  // Move the decimal point `shift` places right on the digit string.
  std::string number(whole);
  std::string rest(frac);
  for (int i = 0; i < shift; ++i) {
    number += rest.empty() ? '0' : rest.front();
    if (!rest.empty()) rest.erase(0, 1);
  }
  if (!rest.empty()) number += "." + rest;
  double v = 0;
  auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), v);
  if (ec != std::errc{} || ptr != number.data() + number.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

std::string tag_text(const TagValue& value) {
  if (auto* s = std::get_if<std::string>(&value)) return *s;
  return format_double(std::get<double>(value));
}

std::string_view to_string(Metric metric) {
  return metric == Metric::ElapsedSeconds ? "ElapsedSeconds" : "MaxMemoryBytes";
}

std::optional<Metric> metric_from_string(std::string_view name) {
  if (name == "ElapsedSeconds" || name == "elapsed") return Metric::ElapsedSeconds;
  if (name == "MaxMemoryBytes" || name == "memory") return Metric::MaxMemoryBytes;
  return std::nullopt;
}

RegressionModel fit_model(std::span<const Sample> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw Error(Errc::InsufficientData, "need at least 2 samples, got " + std::to_string(n));
  // long double sums: the intercept is sensitive when x is large relative to its spread
  long double mx = 0, my = 0;
  for (const auto& s : samples) {
    mx += s.x;
    my += s.y;
  }
  mx /= static_cast<long double>(n);
  my /= static_cast<long double>(n);
  long double sxx = 0, sxy = 0;
  for (const auto& s : samples) {
    sxx += (s.x - mx) * (s.x - mx);
    sxy += (s.x - mx) * (s.y - my);
  }
  if (sxx == 0) throw Error(Errc::DegenerateCovariate, "covariate has zero variance");
  RegressionModel m;
  const long double slope = sxy / sxx;
  m.slope = static_cast<double>(slope);
  m.intercept = static_cast<double>(my - slope * mx);
  double ssr = 0;
  for (const auto& s : samples) {
    double r = s.y - (m.slope * s.x + m.intercept);
    ssr += r * r;
  }
  m.rmse = std::sqrt(ssr / static_cast<double>(n));
  m.n = n;
  m.fitted = true;
  return m;
}

Estimate predict(const RegressionModel& model, double covariate) {
  if (!model.fitted) throw Error(Errc::UnfittedModel, "model has not been fitted");
  return Estimate{std::max(0.0, model.slope * covariate + model.intercept), model.rmse};
}

std::string group_label(const std::map<std::string, std::string>& filter) {
  std::string out;
  for (const auto& [k, v] : filter) {
    if (!out.empty()) out += ',';
    out += k + "=" + v;
  }
  return out;
}

BuildResult build_models(const JobStore& store, const TagRules& rules,
                         const std::vector<std::string>& grouping,
                         const std::string& covariate_key) {
  BuildResult result;
  HistoryQuery q;
  q.finalized = true;
  q.status_in = std::set<JobStatus>{JobStatus::Completed};
  auto records = store.list_jobs(q);
  std::sort(records.begin(), records.end(),
            [](const JobRecord& a, const JobRecord& b) { return a.job_id < b.job_id; });

  std::map<std::string, std::map<std::string, std::string>> filters;
  for (const auto& rec : records) {
    auto tags = rules.tag_job(rec);
    for (auto& w : tags.warnings) result.warnings.push_back(std::move(w));
    auto cov = tags.tags.find(covariate_key);
    if (cov == tags.tags.end() || !std::holds_alternative<double>(cov->second)) continue;
    std::map<std::string, std::string> filter;
    bool complete = true;
    for (const auto& key : grouping) {
      auto it = tags.tags.find(key);
      if (it == tags.tags.end()) {
        complete = false;
        break;
      }
      filter[key] = tag_text(it->second);
    }
    if (!complete) continue;
    auto elapsed = parse_duration(rec.final_run_time);
    if (!elapsed) {
      result.warnings.push_back("job " + std::to_string(rec.job_id) + ": unreadable finalRunTime");
      continue;
    }
    auto label = group_label(filter);
    filters[label] = filter;
    result.observations[label].push_back(Observation{rec.job_id, std::get<double>(cov->second),
                                                     static_cast<double>(elapsed->count()),
                                                     static_cast<double>(rec.maximum_memory)});
  }

  for (const auto& [label, obs] : result.observations) {
    if (obs.size() < 2) {
      result.skipped.push_back({label, obs.size(), "fewer than 2 samples"});
      continue;
    }
    for (Metric metric : {Metric::ElapsedSeconds, Metric::MaxMemoryBytes}) {
      std::vector<Sample> samples;
      for (const auto& o : obs)
        samples.push_back(
            {o.covariate, metric == Metric::ElapsedSeconds ? o.elapsed_seconds : o.max_memory_bytes});
      try {
        auto model = fit_model(samples);
        model.tag_filter = filters[label];
        model.covariate_key = covariate_key;
        model.metric = metric;
        result.models.push_back(std::move(model));
      } catch (const Error& e) {
        result.skipped.push_back({label, obs.size(), e.what()});
        break;
      }
    }
  }
  return result;
}

void write_models_csv(std::ostream& out, const std::vector<RegressionModel>& models) {
  out << "group,metric,slope,intercept,n,rmse\n";
  for (const auto& m : models) {
    out << csv_field(group_label(m.tag_filter)) << ',' << to_string(m.metric) << ','
        << format_double(m.slope) << ',' << format_double(m.intercept) << ',' << m.n << ','
        << format_double(m.rmse) << '\n';
  }
}

void write_scatter_csv(std::ostream& out, const BuildResult& result,
                       const std::string& covariate_key, Metric metric) {
  out << "group," << csv_field(covariate_key) << ','
      << (metric == Metric::ElapsedSeconds ? "elapsed_hours" : "ram_gb") << '\n';
  for (const auto& [label, obs] : result.observations) {
    for (const auto& o : obs) {
      double y = metric == Metric::ElapsedSeconds ? o.elapsed_seconds / 3600.0
                                                  : o.max_memory_bytes / double(1ULL << 30);
      out << csv_field(label) << ',' << format_double(o.covariate) << ',' << format_double(y)
          << '\n';
    }
  }
}

}  // namespace clusterscope
