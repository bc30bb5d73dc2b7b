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

#include "clusterscope/job_store.hpp"

#include <spdlog/spdlog.h>
#include <sqlite3.h>

#include <algorithm>

#include "clusterscope/error.hpp"

namespace clusterscope {

namespace {

[[noreturn]] void fail(sqlite3* db, const std::string& what) {
  throw Error(Errc::StorageError, what + ": " + (db ? sqlite3_errmsg(db) : "no database"),
              Stage::Store);
}

class Stmt {
 public:
  Stmt(sqlite3* db, std::string_view sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql.data(), static_cast<int>(sql.size()), &stmt_, nullptr) !=
        SQLITE_OK)
      fail(db, "prepare");
  }
  ~Stmt() { sqlite3_finalize(stmt_); }
  Stmt(const Stmt&) = delete;
  Stmt& operator=(const Stmt&) = delete;

  Stmt& bind(int i, std::int64_t v) {
    check(sqlite3_bind_int64(stmt_, i, v));
    return *this;
  }
  Stmt& bind(int i, std::string_view v) {
    check(sqlite3_bind_text(stmt_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT));
    return *this;
  }
  /// True while rows remain.
  bool step() {
    int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    if (rc == SQLITE_CONSTRAINT)
      throw Error(Errc::ConstraintViolation, sqlite3_errmsg(db_), Stage::Store);
    fail(db_, "step");
  }
  std::int64_t integer(int col) const { return sqlite3_column_int64(stmt_, col); }
  std::string text(int col) const {
    auto* p = sqlite3_column_text(stmt_, col);
    return p ? std::string(reinterpret_cast<const char*>(p),
                           static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col)))
             : std::string{};
  }

 private:
  void check(int rc) {
    if (rc != SQLITE_OK) fail(db_, "bind");
  }
  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

void exec(sqlite3* db, const char* sql) {
  char* msg = nullptr;
  if (sqlite3_exec(db, sql, nullptr, nullptr, &msg) != SQLITE_OK) {
    std::string text = msg ? msg : "unknown";
    sqlite3_free(msg);
    throw Error(Errc::StorageError, std::string("exec: ") + text, Stage::Store);
  }
}

/// Commits on success, rolls back when unwinding.
class Transaction {
 public:
  Transaction(sqlite3* db, const char* begin) : db_(db) { exec(db, begin); }
  ~Transaction() {
    if (!done_) sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
  }
  void commit() {
    exec(db_, "COMMIT");
    done_ = true;
  }

 private:
  sqlite3* db_;
  bool done_ = false;
};

std::string quoted(std::string_view name) { return "\"" + std::string(name) + "\""; }

std::string column_list() {
  std::string out;
  for (const auto& c : kJobColumns) {
    if (!out.empty()) out += ", ";
    out += quoted(c.name);
  }
  return out;
}

std::string create_job_table_sql() {
  std::string sql = "CREATE TABLE IF NOT EXISTS \"Job\" (";
  for (std::size_t i = 0; i < kJobColumns.size(); ++i) {
    const auto& c = kJobColumns[i];
    if (i) sql += ", ";
    sql += quoted(c.name) + " " + std::string(c.sql_type);
    if (c.name == "jobId") sql += " PRIMARY KEY";
  }
  sql +=
      ", CHECK (\"parallel\" IN (0, 1)), CHECK (\"cores\" >= 1),"
      " CHECK (length(\"user\") <= 30), CHECK (length(\"timeAdded\") <= 30),"
      " CHECK (\"currentMemory\" >= 0), CHECK (\"maximumMemory\" >= \"currentMemory\"))";
  return sql;
}

const std::string kSelect = "SELECT " + column_list() + " FROM \"Job\"";

JobRecord read_record(const Stmt& s) {
  JobRecord r;
  r.job_id = s.integer(0);
  r.job_name = s.text(1);
  r.user = s.text(2);
  r.status = status_from_code(static_cast<int>(s.integer(3))).value_or(JobStatus::Unknown);
  r.path = s.text(4);
  r.command = s.text(5);
  r.source_directory = s.text(6);
  r.outpath = s.text(7);
  r.memory_requested = s.text(8);
  r.parallel = s.integer(9) != 0;
  r.cores = static_cast<int>(s.integer(10));
  r.time_added = s.text(11);
  r.run_time = s.text(12);
  r.time_remaining = s.text(13);
  r.current_memory = static_cast<std::uint64_t>(s.integer(14));
  r.maximum_memory = static_cast<std::uint64_t>(s.integer(15));
  r.cluster_node = s.text(16);
  r.final_run_time = s.text(17);
  r.final_status = s.text(18);
  return r;
}

void bind_record(Stmt& s, const JobRecord& r) {
  s.bind(1, r.job_id)
      .bind(2, r.job_name)
      .bind(3, r.user)
      .bind(4, static_cast<std::int64_t>(r.status))
      .bind(5, r.path)
      .bind(6, r.command)
      .bind(7, r.source_directory)
      .bind(8, r.outpath)
      .bind(9, r.memory_requested)
      .bind(10, std::int64_t{r.parallel ? 1 : 0})
      .bind(11, std::int64_t{r.cores})
      .bind(12, r.time_added)
      .bind(13, r.run_time)
      .bind(14, r.time_remaining)
      .bind(15, static_cast<std::int64_t>(r.current_memory))
      .bind(16, static_cast<std::int64_t>(r.maximum_memory))
      .bind(17, r.cluster_node)
      .bind(18, r.final_run_time)
      .bind(19, r.final_status);
}

std::optional<JobRecord> select_one(sqlite3* db, JobId id) {
  Stmt s(db, kSelect + " WHERE \"jobId\" = ?1");
  s.bind(1, id);
  if (!s.step()) return std::nullopt;
  return read_record(s);
}

void validate(const JobRecord& r) {
  auto bad = [](const std::string& what) {
    return Error(Errc::ConstraintViolation, what, Stage::Store);
  };
  if (r.job_id <= 0) throw bad("jobId must be positive");
  if (r.user.size() > kMaxUserLength) throw bad("user longer than 30 characters");
  if (r.time_added.size() > 30) throw bad("timeAdded longer than 30 characters");
  if (r.cores < 1) throw bad("cores must be at least 1");
  if (!r.time_added.empty() && !parse_iso8601(r.time_added)) throw bad("timeAdded is not ISO-8601");
  if (r.final_status.size() || r.final_run_time.size())
    throw bad("final fields are only written by finalize_job");
  if (static_cast<std::int64_t>(r.maximum_memory) < 0 ||
      static_cast<std::int64_t>(r.current_memory) < 0)
    throw bad("memory out of range");
}

sqlite3* open_db(const std::filesystem::path& file, int flags) {
  sqlite3* db = nullptr;
  if (sqlite3_open_v2(file.c_str(), &db, flags, nullptr) != SQLITE_OK) {
    std::string msg = db ? sqlite3_errmsg(db) : "out of memory";
    sqlite3_close(db);
    throw Error(Errc::StorageError, "cannot open " + file.string() + ": " + msg, Stage::Store);
  }
  sqlite3_busy_timeout(db, 5000);
  return db;
}

}  // namespace

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

JobStore::JobStore(std::filesystem::path file, Clock clock)
    : file_(std::move(file)), clock_(std::move(clock)) {
  if (file_.empty()) throw Error(Errc::InvalidParams, "job store needs a file path");
  writer_ = open_db(file_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX);
  try {
    exec(writer_, "PRAGMA journal_mode=WAL");
    exec(writer_, "PRAGMA synchronous=FULL");
    Transaction tx(writer_, "BEGIN IMMEDIATE");
    int version = 0;
    {
      Stmt s(writer_, "PRAGMA user_version");
      if (s.step()) version = static_cast<int>(s.integer(0));
    }
    if (version != 0 && version != kSchemaVersion)
      throw Error(Errc::StorageError, "unsupported schema version " + std::to_string(version),
                  Stage::Store);
    exec(writer_, create_job_table_sql().c_str());
    exec(writer_,
         "CREATE TABLE IF NOT EXISTS \"JobTag\" (\"jobId\" INTEGER NOT NULL, \"tagKey\" TEXT NOT "
         "NULL, \"value\" TEXT NOT NULL, PRIMARY KEY (\"jobId\", \"tagKey\"))");
    exec(writer_,
         "CREATE TABLE IF NOT EXISTS \"JobExtra\" (\"jobId\" INTEGER PRIMARY KEY, \"errorPath\" "
         "TEXT NOT NULL)");
    exec(writer_, "CREATE INDEX IF NOT EXISTS \"JobByAdded\" ON \"Job\" (\"timeAdded\", \"jobId\")");
    exec(writer_, ("PRAGMA user_version=" + std::to_string(kSchemaVersion)).c_str());
    tx.commit();
  } catch (...) {
    sqlite3_close(writer_);
    throw;
  }
}

JobStore::~JobStore() { sqlite3_close(writer_); }

sqlite3* JobStore::open_reader() const {
  return open_db(file_, SQLITE_OPEN_READONLY | SQLITE_OPEN_FULLMUTEX);
}

namespace {
struct Reader {
  sqlite3* db;
  explicit Reader(sqlite3* d) : db(d) { exec(db, "BEGIN"); }
  ~Reader() {
    sqlite3_exec(db, "COMMIT", nullptr, nullptr, nullptr);
    sqlite3_close(db);
  }
};
}  // namespace

JobRecord JobStore::upsert_job(const JobRecord& record) {
  validate(record);
  JobRecord r = record;
  std::lock_guard lock(write_mu_);
  Transaction tx(writer_, "BEGIN IMMEDIATE");
  auto existing = select_one(writer_, r.job_id);
  r.maximum_memory = std::max(r.maximum_memory, r.current_memory);
  if (existing) {
    if (existing->finalized())
      throw Error(Errc::AlreadyFinal, "job " + std::to_string(r.job_id) + " is final",
                  Stage::Store);
    r.time_added = existing->time_added;
    r.maximum_memory = std::max(r.maximum_memory, existing->maximum_memory);
    std::string sql = "UPDATE \"Job\" SET ";
    for (std::size_t i = 1; i < kJobColumns.size(); ++i) {
      if (i > 1) sql += ", ";
      sql += quoted(kJobColumns[i].name) + " = ?" + std::to_string(i + 1);
    }
    sql += " WHERE \"jobId\" = ?1";
    Stmt s(writer_, sql);
    bind_record(s, r);
    s.step();
  } else {
    if (r.time_added.empty()) r.time_added = format_iso8601(clock_());
    std::string sql = "INSERT INTO \"Job\" (" + column_list() + ") VALUES (";
    for (std::size_t i = 0; i < kJobColumns.size(); ++i) sql += (i ? ", ?" : "?") + std::to_string(i + 1);
    sql += ")";
    Stmt s(writer_, sql);
    bind_record(s, r);
    s.step();
  }
  tx.commit();
  return r;
}

std::optional<JobRecord> JobStore::find_job(JobId id) const {
  Reader rd(open_reader());
  return select_one(rd.db, id);
}

JobRecord JobStore::get_job(JobId id) const {
  auto r = find_job(id);
  if (!r) throw Error(Errc::NotFound, "no job " + std::to_string(id), Stage::Store);
  return *r;
}

std::vector<JobRecord> JobStore::list_jobs(const HistoryQuery& q) const {
  if (!q.has_filter() && !q.allow_all)
    throw Error(Errc::InvalidParams, "history query needs a filter or allow_all");
  std::string sql = kSelect + " WHERE 1";
  int next = 1;
  std::vector<std::pair<int, std::string>> binds;
  auto arg = [&](std::string v) {
    binds.emplace_back(next, std::move(v));
    return "?" + std::to_string(next++);
  };
  if (q.user) sql += " AND \"user\" = " + arg(*q.user);
  if (q.status_in) {
    sql += " AND \"status\" IN (-1";
    for (auto s : *q.status_in) sql += ", " + std::to_string(static_cast<int>(s));
    sql += ")";
  }
  for (const auto& [k, v] : q.tag_equals) {
    sql += " AND EXISTS (SELECT 1 FROM \"JobTag\" t WHERE t.\"jobId\" = \"Job\".\"jobId\" AND t.\"tagKey\" = " +
           arg(k) + " AND t.\"value\" = " + arg(v) + ")";
  }
  if (q.added_after) sql += " AND \"timeAdded\" >= " + arg(format_iso8601(*q.added_after));
  if (q.added_before) sql += " AND \"timeAdded\" < " + arg(format_iso8601(*q.added_before));
  if (q.finalized) sql += *q.finalized ? " AND \"finalStatus\" <> ''" : " AND \"finalStatus\" = ''";
  sql += " ORDER BY \"timeAdded\" DESC, \"jobId\" DESC";

  Reader rd(open_reader());
  Stmt s(rd.db, sql);
  for (const auto& [i, v] : binds) s.bind(i, v);
  std::vector<JobRecord> out;
  while (s.step()) out.push_back(read_record(s));
  return out;
}

JobRecord JobStore::finalize_job(JobId id, const AccountingRecord& acct) {
  if (!is_terminal(acct.final_status) && acct.final_status != JobStatus::Unknown)
    throw Error(Errc::ConstraintViolation, "final status must be terminal or Unknown",
                Stage::Store);
  std::lock_guard lock(write_mu_);
  Transaction tx(writer_, "BEGIN IMMEDIATE");
  auto existing = select_one(writer_, id);
  if (!existing) throw Error(Errc::NotFound, "no job " + std::to_string(id), Stage::Store);
  if (existing->finalized())
    throw Error(Errc::AlreadyFinal, "job " + std::to_string(id) + " is final", Stage::Store);
  JobRecord r = *existing;
  r.status = acct.final_status;
  r.final_status = std::string(to_string(acct.final_status));
  r.final_run_time = format_duration(acct.final_run_time);
  r.maximum_memory = std::max(r.maximum_memory, acct.maximum_memory);
  Stmt s(writer_,
         "UPDATE \"Job\" SET \"status\" = ?2, \"finalStatus\" = ?3, \"finalRunTime\" = ?4, "
         "\"maximumMemory\" = ?5 WHERE \"jobId\" = ?1");
  s.bind(1, id)
      .bind(2, static_cast<std::int64_t>(r.status))
      .bind(3, r.final_status)
      .bind(4, r.final_run_time)
      .bind(5, static_cast<std::int64_t>(r.maximum_memory));
  s.step();
  tx.commit();
  spdlog::debug("finalized job {} as {}", id, r.final_status);
  return r;
}

std::vector<JobId> JobStore::unfinalized_ids() const {
  Reader rd(open_reader());
  Stmt s(rd.db, "SELECT \"jobId\" FROM \"Job\" WHERE \"finalStatus\" = '' ORDER BY \"jobId\"");
  std::vector<JobId> out;
  while (s.step()) out.push_back(s.integer(0));
  return out;
}

void JobStore::set_tags(JobId id, const std::map<std::string, std::string>& tags) {
  std::lock_guard lock(write_mu_);
  Transaction tx(writer_, "BEGIN IMMEDIATE");
  if (!select_one(writer_, id))
    throw Error(Errc::NotFound, "no job " + std::to_string(id), Stage::Store);
  {
    Stmt del(writer_, "DELETE FROM \"JobTag\" WHERE \"jobId\" = ?1");
    del.bind(1, id);
    del.step();
  }
  for (const auto& [k, v] : tags) {
    Stmt s(writer_, "INSERT INTO \"JobTag\" (\"jobId\", \"tagKey\", \"value\") VALUES (?1, ?2, ?3)");
    s.bind(1, id).bind(2, k).bind(3, v);
    s.step();
  }
  tx.commit();
}

std::map<std::string, std::string> JobStore::tags(JobId id) const {
  Reader rd(open_reader());
  Stmt s(rd.db, "SELECT \"tagKey\", \"value\" FROM \"JobTag\" WHERE \"jobId\" = ?1");
  s.bind(1, id);
  std::map<std::string, std::string> out;
  while (s.step()) out.emplace(s.text(0), s.text(1));
  return out;
}

void JobStore::set_error_path(JobId id, const std::string& path) {
  std::lock_guard lock(write_mu_);
  Stmt s(writer_,
         "INSERT INTO \"JobExtra\" (\"jobId\", \"errorPath\") VALUES (?1, ?2) "
         "ON CONFLICT(\"jobId\") DO UPDATE SET \"errorPath\" = excluded.\"errorPath\"");
  s.bind(1, id).bind(2, path);
  s.step();
}

std::optional<std::string> JobStore::error_path(JobId id) const {
  Reader rd(open_reader());
  Stmt s(rd.db, "SELECT \"errorPath\" FROM \"JobExtra\" WHERE \"jobId\" = ?1");
  s.bind(1, id);
  if (!s.step()) return std::nullopt;
  return s.text(0);
}

std::vector<std::string> JobStore::schema_columns() const {
  Reader rd(open_reader());
  Stmt s(rd.db, "SELECT name FROM pragma_table_info('Job') ORDER BY cid");
  std::vector<std::string> out;
  while (s.step()) out.push_back(s.text(0));
  return out;
}

int JobStore::schema_version() const {
  Reader rd(open_reader());
  Stmt s(rd.db, "PRAGMA user_version");
  return s.step() ? static_cast<int>(s.integer(0)) : 0;
}

void JobStore::export_csv(std::ostream& out) const {
  for (std::size_t i = 0; i < kJobColumns.size(); ++i)
    out << (i ? "," : "") << kJobColumns[i].name;
  out << "\r\n";
  Reader rd(open_reader());
  Stmt s(rd.db, kSelect + " ORDER BY \"jobId\"");
  while (s.step()) {
    for (std::size_t i = 0; i < kJobColumns.size(); ++i)
      out << (i ? "," : "") << csv_field(s.text(static_cast<int>(i)));
    out << "\r\n";
  }
}

std::size_t JobStore::purge_finalized_before(Timestamp cutoff) {
  std::lock_guard lock(write_mu_);
  Transaction tx(writer_, "BEGIN IMMEDIATE");
  const std::string doomed =
      "SELECT \"jobId\" FROM \"Job\" WHERE \"finalStatus\" <> '' AND \"timeAdded\" < ?1";
  std::string when = format_iso8601(cutoff);
  for (const char* table : {"JobTag", "JobExtra"}) {
    Stmt s(writer_, "DELETE FROM \"" + std::string(table) + "\" WHERE \"jobId\" IN (" + doomed + ")");
    s.bind(1, when);
    s.step();
  }
  Stmt s(writer_, "DELETE FROM \"Job\" WHERE \"finalStatus\" <> '' AND \"timeAdded\" < ?1");
  s.bind(1, when);
  s.step();
  auto n = static_cast<std::size_t>(sqlite3_changes(writer_));
  tx.commit();
  return n;
}

}  // namespace clusterscope
