// SPDX-FileCopyrightText: Copyright (c) 2026 The hfalloc Authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <sstream>

#include "test_support.hpp"

namespace hfalloc {
namespace {

ReplayOptions options(Mode mode) {
  ReplayOptions o;
  o.arena.mode = mode;
  o.read_file = [](const std::string& name) { return testing::read_text(testing::data_path(name)); };
  return o;
}

std::string run(const std::string& trace, const ReplayOptions& o, int* exit_code = nullptr) {
  std::ostringstream out;
  const ReplayOutcome r = replay(parse_trace(trace), o, out);
  if (exit_code) *exit_code = r.exit_code;
  return out.str();
}

TEST(ParseTrace, AcceptsGrammar) {
  const auto cmds = parse_trace(
      "# comment\n"
      "load t.csv 0x12e000000 16MiB\n"
      "alloc a 32 7   # trailing\n"
      "free a 7\n"
      "free null 3 force\n"
      "base 11d800000\n"
      "\n"
      "dump\n"
      "check\n");
  ASSERT_EQ(cmds.size(), 7u);
  EXPECT_EQ(cmds[0].kind, TraceCommand::Kind::Load);
  EXPECT_EQ(cmds[0].address, 0x12e000000u);
  EXPECT_EQ(cmds[0].capacity, 16u << 20);
  EXPECT_EQ(cmds[1].kind, TraceCommand::Kind::Alloc);
  EXPECT_EQ(cmds[1].size, 32);
  EXPECT_EQ(cmds[1].owner, 7u);
  EXPECT_EQ(cmds[1].line, 3u);
  EXPECT_TRUE(cmds[3].tag.empty());
  EXPECT_TRUE(cmds[3].forced);
  EXPECT_EQ(cmds[4].address, 0x11d800000u);
  EXPECT_EQ(cmds[6].kind, TraceCommand::Kind::Check);
}

TEST(ParseTrace, ErrorsNameTheLine) {
  const auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse_trace(text);
    } catch (const TraceError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of("dump\nfrob\n"), 2u);
  EXPECT_EQ(line_of("alloc a 32\n"), 1u);
  EXPECT_EQ(line_of("dump\n\nalloc a x 1\n"), 3u);
  EXPECT_EQ(line_of("free a 1 please\n"), 1u);
  EXPECT_EQ(line_of("alloc null 8 1\n"), 1u);
  EXPECT_EQ(line_of("load f zz 16MiB\n"), 1u);
  EXPECT_EQ(line_of("load f 0x0 16XB\n"), 1u);
  EXPECT_EQ(line_of("dump extra\n"), 1u);
}

TEST(Replay, EmptyTraceProducesNothing) {
  int rc = -1;
  EXPECT_EQ(run("", options(Mode::HeadFirst), &rc), "");
  EXPECT_EQ(rc, kExitOk);
}

TEST(Replay, HeadFirstTablesVerbatim) {
  int rc = -1;
  const std::string out = run(testing::read_text(testing::data_path("head_first_replay.trace")),
                              options(Mode::HeadFirst), &rc);
  EXPECT_EQ(rc, kExitOk);
  EXPECT_EQ(out, testing::read_text(testing::data_path("head_first_replay.expected")));
}

TEST(Replay, NonHeadFirstTablesVerbatim) {
  int rc = -1;
  const std::string out = run(testing::read_text(testing::data_path("non_head_first_replay.trace")),
                              options(Mode::NonHeadFirst), &rc);
  EXPECT_EQ(rc, kExitOk);
  EXPECT_EQ(out, testing::read_text(testing::data_path("non_head_first_replay.expected")));
}

TEST(Replay, IsByteIdenticalAcrossRuns) {
  const std::string trace =
      "alloc a 100 1\nalloc b 200 2\nalloc c 8 1\nfree b 2\nalloc d 64 3\nfree a 9\nfree a 1\ndump\ncheck\n";
  ReplayOptions o = options(Mode::NonHeadFirst);
  o.arena.capacity = 4096;
  EXPECT_EQ(run(trace, o), run(trace, o));
}

TEST(Replay, DumpsAreLoadable) {
  ReplayOptions o = options(Mode::HeadFirst);
  o.arena.capacity = 4096;
  o.arena.base_address = 0x5000;
  const std::string out = run("alloc a 24 1\nalloc b 1000 2\nfree a 1\ndump\n", o);
  const Snapshot rows = parse_csv(out);
  EXPECT_EQ(snapshot(load_snapshot(rows, 0x5000, 4096)), rows);
}

TEST(Replay, OutcomesAreLoggedNotFatal) {
  ReplayOptions o = options(Mode::HeadFirst);
  o.arena.capacity = 128;
  std::ostringstream out;
  const ReplayOutcome r =
      replay(parse_trace("alloc a 64 1\nalloc b 1024 1\nfree a 2\nfree a 2 force\nfree a 1\nfree null 1\n"), o, out);
  EXPECT_EQ(r.exit_code, kExitOk);
  ASSERT_EQ(r.log.size(), 6u);
  EXPECT_NE(r.log[0].find("-> OK"), std::string::npos);
  EXPECT_NE(r.log[1].find("OUT_OF_MEMORY"), std::string::npos);
  EXPECT_NE(r.log[2].find("SEGFAULT"), std::string::npos);
  EXPECT_NE(r.log[3].find("FREED"), std::string::npos);
  EXPECT_NE(r.log[4].find("UNALLOCATED"), std::string::npos);
  EXPECT_NE(r.log[5].find("UNALLOCATED"), std::string::npos);
}

TEST(Replay, UnknownAndDuplicateTagsAreErrors) {
  ReplayOptions o = options(Mode::HeadFirst);
  o.arena.capacity = 1024;
  EXPECT_THROW(run("free x 1\n", o), TraceError);
  EXPECT_THROW(run("alloc a 8 1\nalloc a 8 1\n", o), TraceError);
  EXPECT_NO_THROW(run("alloc a 8 1\nfree a 1\nalloc a 8 1\n", o));
  EXPECT_THROW(run("load missing.csv 0x0 16MiB\n", o), TraceError);
}

TEST(Replay, TableFormat) {
  ReplayOptions o = options(Mode::HeadFirst);
  o.arena.capacity = 64;
  o.format = DumpFormat::Table;
  EXPECT_EQ(run("dump\n", o), "i  Address  Left Addr.  Free?  Size\n0     0x10         0x0    yes    48\n");
}

}  // namespace
}  // namespace hfalloc
