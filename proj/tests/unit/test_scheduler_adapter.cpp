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

#include <gtest/gtest.h>

#include <random>

#include "clusterscope/error.hpp"
#include "clusterscope/scheduler_adapter.hpp"
#include "clusterscope/sge_grammar.hpp"

using namespace clusterscope;

namespace {

const SgeAdapter adapter;

SubmitSpec spec() {
  SubmitSpec s;
  s.job_name = "bwa_ERR009309";
  s.script_path = "/home/alice/run.sh";
  s.source_directory = "/home/alice/work";
  s.memory_requested = "4G";
  return s;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::TransportError;
}

constexpr const char* kListing =
    "job-ID  prior   name       user         state submit/start at     queue                          slots ja-task-ID\n"
    "-----------------------------------------------------------------------------------------------------------------\n"
    "    101 0.55500 bwa_run    alice        r     01/15/2026 10:00:00 all.q@node2                        1\n"
    "    102 0.00000 star_run   bob          qw    01/15/2026 10:05:00                                    4\n"
    "    103 0.55500 hold_me    alice        hqw   01/15/2026 10:06:00                                    1\n"
    "    104 0.55500 broken     carol        Eqw   01/15/2026 10:07:00                                    1\n";

constexpr const char* kDetail =
    "==============================================================\n"
    "job_number:                 101\n"
    "job_name:                   bwa_run\n"
    "owner:                      alice\n"
    "sge_o_workdir:              /home/alice/work\n"
    "cmd:                        qsub -N bwa_run -wd /home/alice/work -l h_vmem=2.5G run.sh\n"
    "script_file:                run.sh\n"
    "stdout_path:                /home/alice/work/bwa_run.o101\n"
    "stderr_path:                /home/alice/work/bwa_run.e101\n"
    "hard_resource_list:         h_vmem=2.5G\n"
    "parallel:                   0\n"
    "slots:                      1\n"
    "usage    1:                 cpu=00:10:00, vmem=1.5G, maxvmem=2G\n"
    "runtime:                    00:10:00\n"
    "time_remaining:             23:50:00\n";

}  // namespace

TEST(Render, EveryKind) {
  EXPECT_EQ(adapter.render_command(CommandKind::List, std::monostate{}),
            (CommandLine{"qstat", "-u", "*"}));
  EXPECT_EQ(adapter.render_command(CommandKind::ListForUser, UserRef{"alice"}),
            (CommandLine{"qstat", "-u", "alice"}));
  EXPECT_EQ(adapter.render_command(CommandKind::Detail, JobId{7}), (CommandLine{"qstat", "-j", "7"}));
  EXPECT_EQ(adapter.render_command(CommandKind::Cancel, JobId{7}), (CommandLine{"qdel", "7"}));
  EXPECT_EQ(adapter.render_command(CommandKind::Accounting, JobId{7}),
            (CommandLine{"qacct", "-j", "7"}));
  EXPECT_EQ(adapter.render_command(CommandKind::Submit, spec()),
            (CommandLine{"qsub", "-N", "bwa_ERR009309", "-wd", "/home/alice/work", "-l",
                         "h_vmem=4G", "/home/alice/run.sh"}));
}

TEST(Render, ParallelAndOutput) {
  auto s = spec();
  s.parallel = true;
  s.cores = 8;
  s.output_path = "/tmp/out.txt";
  s.extra_args = {"-q", "long.q"};
  EXPECT_EQ(adapter.render_command(CommandKind::Submit, s),
            (CommandLine{"qsub", "-N", "bwa_ERR009309", "-wd", "/home/alice/work", "-l",
                         "h_vmem=4G", "-pe", "smp", "8", "-o", "/tmp/out.txt", "-q", "long.q",
                         "/home/alice/run.sh"}));
}

TEST(Render, RejectsInvalidParams) {
  auto with = [](auto mutate) {
    auto s = spec();
    mutate(s);
    return code_of([&] { adapter.render_command(CommandKind::Submit, s); });
  };
  EXPECT_EQ(with([](SubmitSpec& s) { s.cores = 0; }), Errc::InvalidParams);
  EXPECT_EQ(with([](SubmitSpec& s) { s.cores = 4; }), Errc::InvalidParams);  // not parallel
  EXPECT_EQ(with([](SubmitSpec& s) { s.job_name = ""; }), Errc::InvalidParams);
  EXPECT_EQ(with([](SubmitSpec& s) { s.job_name = "a b"; }), Errc::InvalidParams);
  EXPECT_EQ(with([](SubmitSpec& s) { s.job_name = "-x"; }), Errc::InvalidParams);
  EXPECT_EQ(with([](SubmitSpec& s) { s.job_name = "a/b"; }), Errc::InvalidParams);
  EXPECT_EQ(with([](SubmitSpec& s) { s.script_path = "run.sh\n"; }), Errc::InvalidParams);
  EXPECT_EQ(with([](SubmitSpec& s) { s.memory_requested = "4g"; }), Errc::InvalidParams);
  EXPECT_EQ(code_of([] { adapter.render_command(CommandKind::Detail, JobId{0}); }),
            Errc::InvalidParams);
  EXPECT_EQ(code_of([] { adapter.render_command(CommandKind::Detail, std::monostate{}); }),
            Errc::InvalidParams);
  EXPECT_EQ(code_of([] { adapter.render_command(CommandKind::ListForUser, UserRef{"a b"}); }),
            Errc::InvalidParams);
}

TEST(ParseList, Fixture) {
  auto jobs = adapter.parse_job_list(kListing);
  ASSERT_EQ(jobs.size(), 4u);
  EXPECT_EQ(jobs[0].job_id, 101);
  EXPECT_EQ(jobs[0].status, JobStatus::Running);
  EXPECT_EQ(jobs[0].queue_or_node, "all.q@node2");
  EXPECT_EQ(jobs[0].started_or_submitted_at, make_timestamp(2026, 1, 15, 10, 0, 0));
  EXPECT_EQ(jobs[1].status, JobStatus::Queued);
  EXPECT_EQ(jobs[1].queue_or_node, "");
  EXPECT_EQ(jobs[1].slots, 4);
  EXPECT_EQ(jobs[2].status, JobStatus::Queued);
  EXPECT_EQ(jobs[3].status, JobStatus::Error);
}

TEST(ParseList, EmptyAndMalformed) {
  EXPECT_TRUE(adapter.parse_job_list("").empty());
  try {
    adapter.parse_job_list("header line with too few columns\n  101 x\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ParseError);
    EXPECT_EQ(e.line(), 1u);
  }
  std::string dup = std::string(kListing) +
                    "    101 0.55500 bwa_run    alice        r     01/15/2026 10:00:00 all.q@node2 1\n";
  EXPECT_EQ(code_of([&] { adapter.parse_job_list(dup); }), Errc::ParseError);
}

TEST(ParseDetail, Fixture) {
  auto d = adapter.parse_job_detail(kDetail);
  EXPECT_EQ(d.job_id, 101);
  EXPECT_EQ(d.owner, "alice");
  EXPECT_EQ(d.script_path, "run.sh");
  EXPECT_EQ(d.error_path, "/home/alice/work/bwa_run.e101");
  EXPECT_EQ(d.memory_requested, "2.5G");
  EXPECT_EQ(d.current_memory, 1610612736ULL);
  EXPECT_EQ(d.maximum_memory, 2147483648ULL);
  EXPECT_EQ(d.run_time, Seconds{600});
  EXPECT_EQ(d.cpu_time_used, Seconds{600});
  EXPECT_EQ(d.time_remaining, Seconds{23 * 3600 + 50 * 60});
  EXPECT_FALSE(d.parallel);
}

TEST(ParseDetail, RejectsInconsistentStanza) {
  std::string bad = kDetail;
  bad.replace(bad.find("maxvmem=2G"), 10, "maxvmem=1G");
  EXPECT_EQ(code_of([&] { adapter.parse_job_detail(bad); }), Errc::ParseError);
  std::string multi = kDetail;
  multi.replace(multi.find("slots:                      1"), 29, "slots:                      4");
  EXPECT_EQ(code_of([&] { adapter.parse_job_detail(multi); }), Errc::ParseError);
  EXPECT_EQ(code_of([] { adapter.parse_job_detail("job_name: x\n"); }), Errc::ParseError);
  std::string lower = kDetail;
  lower.replace(lower.find("vmem=1.5G"), 9, "vmem=1.5g");
  EXPECT_EQ(code_of([&] { adapter.parse_job_detail(lower); }), Errc::UnitError);
}

TEST(ParseAccounting, Outcomes) {
  auto record = [](int exit, int deleted, const char* wall) {
    return std::string("==============================================================\n") +
           "qname        all.q\njob_number   55\nexit_status  " + std::to_string(exit) +
           "\ndeleted      " + std::to_string(deleted) + "\nru_wallclock " + wall +
           "\nmaxvmem      3G\n";
  };
  auto ok = adapter.parse_accounting(record(0, 0, "3600"));
  EXPECT_EQ(ok.final_status, JobStatus::Completed);
  EXPECT_EQ(ok.final_run_time, Seconds{3600});
  EXPECT_EQ(ok.maximum_memory, 3ULL << 30);
  EXPECT_EQ(adapter.parse_accounting(record(1, 0, "3600s")).final_status, JobStatus::Error);
  EXPECT_EQ(adapter.parse_accounting(record(137, 1, "3600.0")).final_status, JobStatus::Deleted);
  auto killed = adapter.parse_accounting(record(137, 0, "60"));
  EXPECT_EQ(killed.final_status, JobStatus::Error);
  EXPECT_EQ(killed.exit_code, 137);
  EXPECT_EQ(code_of([] { adapter.parse_accounting("error: job id 55 not found\n"); }),
            Errc::NotFinished);
  EXPECT_EQ(code_of([] { adapter.parse_accounting("job_number 55\n"); }), Errc::ParseError);
}

TEST(ParseSubmit, Acknowledgement) {
  EXPECT_EQ(adapter.parse_submit("Your job 4242 (\"x\") has been submitted\n"), 4242);
  EXPECT_EQ(code_of([] { adapter.parse_submit("Unable to run job\n"); }), Errc::ParseError);
}

TEST(MapStatus, TableAndTotality) {
  for (const auto& e : sge::kStateTable) EXPECT_EQ(adapter.map_status(e.letters), e.status);
  EXPECT_EQ(adapter.map_status("zzz"), JobStatus::Unknown);
  EXPECT_EQ(adapter.map_status(""), JobStatus::Unknown);
}

TEST(MapStatus, IdempotentOnCanonicalNames) {
  std::mt19937_64 rng(11);
  const std::string alphabet = "qwhrtsSEdRuxz";
  std::uniform_int_distribution<std::size_t> len(0, 4), pick(0, alphabet.size() - 1);
  for (int i = 0; i < 2000; ++i) {
    std::string raw;
    for (auto n = len(rng); n > 0; --n) raw += alphabet[pick(rng)];
    auto once = adapter.map_status(raw);
    EXPECT_EQ(adapter.map_status(to_string(once)), once) << raw;
  }
}
