// SPDX-FileCopyrightText: Copyright (c) 2026 The hfalloc Authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hfalloc/allocator.hpp"
#include "hfalloc/inspector.hpp"

namespace hfalloc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitViolation = 2;

/// Parses "4096", "64KiB", "16MiB" (also "K", "M", "KB", "MB" as binary units).
inline std::optional<std::uint64_t> parse_byte_size(std::string_view text) {
  std::uint64_t value = 0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || p == text.data()) return std::nullopt;
  const std::string_view unit = text.substr(static_cast<std::size_t>(p - text.data()));
  std::uint64_t scale = 1;
  if (unit.empty() || unit == "B")
    scale = 1;
  else if (unit == "KiB" || unit == "K" || unit == "KB")
    scale = 1024;
  else if (unit == "MiB" || unit == "M" || unit == "MB")
    scale = 1024 * 1024;
  else if (unit == "GiB" || unit == "G" || unit == "GB")
    scale = 1024ULL * 1024 * 1024;
  else
    return std::nullopt;
  return value * scale;
}

/// Hex with or without the 0x prefix.
inline std::optional<std::uint64_t> parse_hex(std::string_view text) {
  if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) text.remove_prefix(2);
  std::uint64_t value = 0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), value, 16);
  if (ec != std::errc{} || text.empty() || p != text.data() + text.size()) return std::nullopt;
  return value;
}

/// A malformed trace line or a command that cannot run (unknown tag, ...).
class TraceError : public std::runtime_error {
 public:
  TraceError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct TraceCommand {
  enum class Kind { Alloc, Free, Load, Dump, Check, Base };

  Kind kind = Kind::Dump;
  std::size_t line = 0;
  std::string tag;             // alloc, free (empty for null)
  std::int64_t size = 0;       // alloc
  std::uint32_t owner = 0;     // alloc owner, free caller
  bool forced = false;         // free
  std::string path;            // load
  std::uint64_t address = 0;   // load base, base
  std::uint64_t capacity = 0;  // load
};

/// Line grammar (whitespace separated, '#' starts a comment):
///
///   alloc <tag> <size> <owner>
///   free <tag>|null <owner> [force]
///   load <snapshot-file> <base-hex> <capacity>
///   base <base-hex>
///   dump
///   check
inline std::vector<TraceCommand> parse_trace(std::string_view text) {
  std::vector<TraceCommand> commands;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string line(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const std::size_t hash = line.find('#'); hash != std::string::npos) line.resize(hash);

    std::istringstream in(line);
    std::vector<std::string> tok;
    for (std::string t; in >> t;) tok.push_back(t);
    if (tok.empty()) continue;

    const auto fail = [&](const std::string& what) { throw TraceError(line_no, what); };
    const auto want = [&](std::size_t lo, std::size_t hi) {
      if (tok.size() < lo || tok.size() > hi) fail("wrong number of arguments for '" + tok[0] + "'");
    };
    const auto owner_of = [&](const std::string& s) {
      std::uint64_t v = 0;
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || p != s.data() + s.size() || v > 0xFFFFFFFFULL) fail("bad owner '" + s + "'");
      return static_cast<std::uint32_t>(v);
    };

    TraceCommand cmd;
    cmd.line = line_no;
    const std::string& op = tok[0];
    if (op == "alloc") {
      want(4, 4);
      cmd.kind = TraceCommand::Kind::Alloc;
      cmd.tag = tok[1];
      if (cmd.tag == "null") fail("'null' is reserved and cannot be a tag");
      const auto [p, ec] = std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), cmd.size);
      if (ec != std::errc{} || p != tok[2].data() + tok[2].size()) fail("bad size '" + tok[2] + "'");
      cmd.owner = owner_of(tok[3]);
    } else if (op == "free") {
      want(3, 4);
      cmd.kind = TraceCommand::Kind::Free;
      cmd.tag = tok[1] == "null" ? std::string{} : tok[1];
      cmd.owner = owner_of(tok[2]);
      if (tok.size() == 4) {
        if (tok[3] != "force") fail("expected 'force', got '" + tok[3] + "'");
        cmd.forced = true;
      }
    } else if (op == "load") {
      want(4, 4);
      cmd.kind = TraceCommand::Kind::Load;
      cmd.path = tok[1];
      const auto base = parse_hex(tok[2]);
      if (!base) fail("bad base address '" + tok[2] + "'");
      const auto cap = parse_byte_size(tok[3]);
      if (!cap) fail("bad capacity '" + tok[3] + "'");
      cmd.address = *base;
      cmd.capacity = *cap;
    } else if (op == "base") {
      want(2, 2);
      cmd.kind = TraceCommand::Kind::Base;
      const auto base = parse_hex(tok[1]);
      if (!base) fail("bad base address '" + tok[1] + "'");
      cmd.address = *base;
    } else if (op == "dump") {
      want(1, 1);
      cmd.kind = TraceCommand::Kind::Dump;
    } else if (op == "check") {
      want(1, 1);
      cmd.kind = TraceCommand::Kind::Check;
    } else {
      fail("unknown command '" + op + "'");
    }
    commands.push_back(std::move(cmd));
  }
  return commands;
}

enum class DumpFormat { Csv, Table };

struct ReplayOptions {
  AllocatorConfig arena;
  DumpFormat format = DumpFormat::Csv;
  // Reads snapshot files named by `load`; tests substitute an in-memory map.
  std::function<std::string(const std::string&)> read_file;
};

struct ReplayOutcome {
  int exit_code = kExitOk;
  std::vector<std::string> log;  // one line per alloc/free outcome and failed check
};

/// Executes `commands` in order, writing dumps to `out`. Allocation failures
/// and refused frees are logged, not errors. Throws TraceError for unknown
/// tags, duplicate live tags and unloadable snapshots; a failing `check`
/// stops the replay with kExitViolation.
inline ReplayOutcome replay(const std::vector<TraceCommand>& commands, const ReplayOptions& options,
                            std::ostream& out) {
  struct Tagged {
    std::uint64_t address = 0;
    bool live = false;
  };

  ReplayOutcome outcome;
  auto allocator = std::make_unique<Allocator>(options.arena);
  std::map<std::string, Tagged> tags;

  for (const TraceCommand& cmd : commands) {
    std::ostringstream note;
    note << "line " << cmd.line << ": ";
    switch (cmd.kind) {
      case TraceCommand::Kind::Alloc: {
        if (auto it = tags.find(cmd.tag); it != tags.end() && it->second.live)
          throw TraceError(cmd.line, "tag '" + cmd.tag + "' is still live");
        const AllocResult r = allocator->create(cmd.size, cmd.owner);
        note << "alloc " << cmd.tag << ' ' << cmd.size << " owner " << cmd.owner << " -> " << to_string(r.status);
        if (r.ok()) {
          tags[cmd.tag] = Tagged{r.user_address, true};
          note << ' ' << to_hex(r.user_address) << " i=" << r.block->offset;
        }
        break;
      }
      case TraceCommand::Kind::Free: {
        std::optional<std::uint64_t> addr;
        if (!cmd.tag.empty()) {
          const auto it = tags.find(cmd.tag);
          if (it == tags.end()) throw TraceError(cmd.line, "unknown tag '" + cmd.tag + "'");
          addr = it->second.address;
        }
        const FreeStatus s = allocator->free(addr, cmd.owner, cmd.forced);
        if (s == FreeStatus::Freed) tags[cmd.tag].live = false;
        note << "free " << (cmd.tag.empty() ? "null" : cmd.tag) << " caller " << cmd.owner
             << (cmd.forced ? " force" : "") << " -> " << to_string(s);
        break;
      }
      case TraceCommand::Kind::Load: {
        if (!options.read_file) throw TraceError(cmd.line, "no file reader configured");
        try {
          const Snapshot rows = parse_csv(options.read_file(cmd.path));
          allocator = std::make_unique<Allocator>(options.arena, load_snapshot(rows, cmd.address, cmd.capacity));
        } catch (const std::exception& e) {
          throw TraceError(cmd.line, "cannot load '" + cmd.path + "': " + e.what());
        }
        tags.clear();
        note << "load " << cmd.path;
        break;
      }
      case TraceCommand::Kind::Base: {
        const std::uint64_t old_base = allocator->with_arena([&](Arena& a) {
          const std::uint64_t was = a.base_address();
          a.set_base_address(cmd.address);
          return was;
        });
        // Tags keep naming the same blocks.
        for (auto& [name, t] : tags) t.address = t.address - old_base + cmd.address;
        note << "base " << to_hex(cmd.address);
        break;
      }
      case TraceCommand::Kind::Dump: {
        const Snapshot rows = allocator->inspect([](const Arena& a) { return snapshot(a); });
        if (options.format == DumpFormat::Csv)
          write_csv(out, rows);
        else
          write_table(out, rows);
        continue;
      }
      case TraceCommand::Kind::Check: {
        const InvariantReport report = allocator->inspect([](const Arena& a) { return check_invariants(a); });
        if (!report.ok()) {
          std::ostringstream os;
          os << report;
          outcome.log.push_back(note.str() + "check failed\n" + os.str());
          outcome.exit_code = kExitViolation;
          return outcome;
        }
        note << "check ok";
        break;
      }
    }
    outcome.log.push_back(note.str());
  }
  return outcome;
}

}  // namespace hfalloc
