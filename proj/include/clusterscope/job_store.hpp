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

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "clusterscope/types.hpp"

struct sqlite3;

namespace clusterscope {

/// One row of the Job table. Durations are "HH:MM:SS", timestamps ISO-8601 UTC.
/// A record is final once `final_status` is nonempty; it is immutable from then on.
struct JobRecord {
  JobId job_id = 0;
  std::string job_name;
  std::string user;
  JobStatus status = JobStatus::Unknown;
  std::string path;
  std::string command;
  std::string source_directory;
  std::string outpath;
  std::string memory_requested;
  bool parallel = false;
  int cores = 1;
  std::string time_added;
  std::string run_time;
  std::string time_remaining;
  std::uint64_t current_memory = 0;
  std::uint64_t maximum_memory = 0;
  std::string cluster_node;
  std::string final_run_time;
  std::string final_status;

  bool finalized() const { return !final_status.empty(); }
  bool operator==(const JobRecord&) const = default;
};

struct ColumnInfo {
  std::string_view name;
  std::string_view sql_type;
};

/// Job table columns in storage order.
inline constexpr std::array<ColumnInfo, 19> kJobColumns{{
    {"jobId", "INTEGER"},
    {"jobName", "TEXT"},
    {"user", "VARCHAR(30)"},
    {"status", "INTEGER"},
    {"path", "TEXT"},
    {"command", "TEXT"},
    {"sourceDirectory", "TEXT"},
    {"outpath", "TEXT"},
    {"memoryRequested", "TEXT"},
    {"parallel", "INTEGER"},
    {"cores", "INTEGER"},
    {"timeAdded", "VARCHAR(30)"},
    {"runTime", "TEXT"},
    {"timeRemaining", "TEXT"},
    {"currentMemory", "INTEGER"},
    {"maximumMemory", "INTEGER"},
    {"clusterNode", "TEXT"},
    {"finalRunTime", "TEXT"},
    {"finalStatus", "TEXT"},
}};

inline constexpr int kSchemaVersion = 1;
inline constexpr std::size_t kMaxUserLength = 30;

struct HistoryQuery {
  std::optional<std::string> user;
  std::optional<std::set<JobStatus>> status_in;
  std::map<std::string, std::string> tag_equals;
  std::optional<Timestamp> added_after;   // inclusive
  std::optional<Timestamp> added_before;  // exclusive
  std::optional<bool> finalized;
  bool allow_all = false;

  bool has_filter() const {
    return user || status_in || !tag_equals.empty() || added_after || added_before || finalized;
  }
};

/// SQLite-backed job archive.
///
/// All mutations go through one writer connection under a mutex. Each read
/// opens its own connection and runs inside a read transaction, so it sees a
/// consistent snapshot while writes continue (WAL mode).
class JobStore {
 public:
  explicit JobStore(std::filesystem::path file, Clock clock = system_now);
  ~JobStore();
  JobStore(const JobStore&) = delete;
  JobStore& operator=(const JobStore&) = delete;

  /// Inserts, or updates every field except timeAdded; maximumMemory only grows.
  /// An empty timeAdded on insert is set from the store clock.
  /// Throws ConstraintViolation, AlreadyFinal or StorageError.
  JobRecord upsert_job(const JobRecord& record);
  /// Throws NotFound.
  JobRecord get_job(JobId id) const;
  std::optional<JobRecord> find_job(JobId id) const;
  /// Ordered by timeAdded desc, jobId desc. Throws InvalidParams for an
  /// empty filter without allow_all.
  std::vector<JobRecord> list_jobs(const HistoryQuery& query) const;
  /// Throws NotFound, AlreadyFinal, ConstraintViolation.
  JobRecord finalize_job(JobId id, const AccountingRecord& acct);
  /// Ids of records that are not final yet, ascending.
  std::vector<JobId> unfinalized_ids() const;

  void set_tags(JobId id, const std::map<std::string, std::string>& tags);
  std::map<std::string, std::string> tags(JobId id) const;
  void set_error_path(JobId id, const std::string& path);
  std::optional<std::string> error_path(JobId id) const;

  /// Column names of the Job table as the database reports them.
  std::vector<std::string> schema_columns() const;
  int schema_version() const;
  /// Full Job table as RFC 4180 CSV with a header row.
  void export_csv(std::ostream& out) const;
  /// Deletes final records added before `cutoff`. Returns the count removed.
  std::size_t purge_finalized_before(Timestamp cutoff);

  const std::filesystem::path& file() const { return file_; }

 private:
  sqlite3* open_reader() const;

  std::filesystem::path file_;
  Clock clock_;
  std::mutex write_mu_;
  sqlite3* writer_ = nullptr;
};

/// RFC 4180 field quoting.
std::string csv_field(std::string_view value);

}  // namespace clusterscope
