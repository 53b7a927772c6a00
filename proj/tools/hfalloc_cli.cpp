// SPDX-FileCopyrightText: Copyright (c) 2026 The hfalloc Authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

// hfalloc: trace replay, snapshot dump/load and benchmarks for the simulated
// best-fit allocator.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hfalloc/hfalloc.hpp"

namespace {

using namespace hfalloc;

struct ArenaFlags {
  std::string mode = "non-head-first";
  std::string arena_size = "16MiB";
  std::string layout = "single";
  std::string base = "0x0";
  std::string format = "csv";
};

void add_arena_flags(CLI::App* cmd, ArenaFlags& f, bool with_mode) {
  if (with_mode)
    cmd->add_option("--mode", f.mode, "head-first | non-head-first")
        ->check(CLI::IsMember({"head-first", "non-head-first"}));
  cmd->add_option("--arena-size", f.arena_size, "arena capacity, e.g. 16MiB");
  cmd->add_option("--layout", f.layout, "initial layout: single | two-block")
      ->check(CLI::IsMember({"single", "two-block"}));
  cmd->add_option("--base", f.base, "simulated base address (hex)");
  cmd->add_option("--format", f.format, "output format: csv | table")->check(CLI::IsMember({"csv", "table"}));
}

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

AllocatorConfig to_config(const ArenaFlags& f) {
  AllocatorConfig c;
  c.mode = parse_mode(f.mode).value_or(Mode::NonHeadFirst);
  c.layout = parse_layout(f.layout).value_or(Layout::SingleBlock);
  const auto size = parse_byte_size(f.arena_size);
  if (!size) throw UsageError("bad --arena-size '" + f.arena_size + "'");
  c.capacity = *size;
  const auto base = parse_hex(f.base);
  if (!base) throw UsageError("bad --base '" + f.base + "'");
  c.base_address = *base;
  return c;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Re-renders CSV text as space-aligned columns.
void write_aligned(std::ostream& out, const std::string& csv) {
  std::vector<std::vector<std::string>> cells;
  std::istringstream in(csv);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> row;
    std::istringstream fields(line);
    for (std::string f; std::getline(fields, f, ',');) row.push_back(f);
    cells.push_back(std::move(row));
  }
  std::vector<std::size_t> width;
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], row[c].size());
    }
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out << "  ";
      out << std::setw(static_cast<int>(width[c])) << row[c];
    }
    out << '\n';
  }
}

void emit_snapshot(std::ostream& out, const Snapshot& rows, const std::string& format) {
  if (format == "table")
    write_table(out, rows);
  else
    write_csv(out, rows);
}

std::vector<std::uint64_t> parse_request_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::istringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    const auto n = parse_byte_size(item);
    if (!n || *n == 0) throw UsageError("bad request count '" + item + "'");
    out.push_back(*n);
  }
  if (out.empty()) throw UsageError("--requests is empty");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated best-fit allocator with head-first and non-head-first modes"};
  app.require_subcommand(1);

  ArenaFlags replay_flags;
  std::string trace_path;
  bool verbose = false;
  auto* replay_cmd = app.add_subcommand("replay", "Replay a trace file against the allocator");
  replay_cmd->add_option("trace", trace_path, "trace file")->required();
  replay_cmd->add_flag("-v,--verbose", verbose, "log every alloc/free outcome to stderr");
  add_arena_flags(replay_cmd, replay_flags, true);

  ArenaFlags dump_flags;
  auto* dump_cmd = app.add_subcommand("dump", "Print the block table of a freshly initialized arena");
  add_arena_flags(dump_cmd, dump_flags, false);

  std::string snapshot_path;
  std::string load_base = "0x0";
  std::string load_capacity = "16MiB";
  std::string load_format = "csv";
  auto* load_cmd = app.add_subcommand("load", "Validate a snapshot file, check invariants and print it back");
  load_cmd->add_option("snapshot", snapshot_path, "snapshot CSV file")->required();
  load_cmd->add_option("--base", load_base, "simulated base address (hex)");
  load_cmd->add_option("--capacity", load_capacity, "arena capacity, e.g. 16MiB");
  load_cmd->add_option("--format", load_format, "csv | table")->check(CLI::IsMember({"csv", "table"}));

  ArenaFlags bench_flags;
  std::string requests = "10000";
  WorkloadConfig wl;
  bool compare = false;
  auto* bench_cmd = app.add_subcommand("bench", "Run the randomized allocate/free workload");
  add_arena_flags(bench_cmd, bench_flags, true);
  bench_cmd->add_option("--requests", requests, "request count or comma-separated list");
  bench_cmd->add_option("--max-alloc", wl.max_alloc_bytes, "largest allocation in bytes")->capture_default_str();
  bench_cmd->add_option("--alloc-probability", wl.alloc_probability, "chance a request allocates")
      ->capture_default_str();
  bench_cmd->add_option("--workers", wl.workers, "concurrent request issuers")->capture_default_str();
  bench_cmd->add_option("--seed", wl.seed, "random seed")->capture_default_str();
  bench_cmd->add_option("--reps", wl.repetitions, "repetitions per row")->capture_default_str();
  bench_cmd->add_flag("--compare", compare, "run both modes and report the head-first time improvement");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*replay_cmd) {
      const std::filesystem::path path(trace_path);
      ReplayOptions options;
      options.arena = to_config(replay_flags);
      options.format = replay_flags.format == "table" ? DumpFormat::Table : DumpFormat::Csv;
      options.read_file = [dir = path.parent_path()](const std::string& name) {
        const std::filesystem::path p(name);
        return read_file(p.is_absolute() ? p : dir / p);
      };
      const auto commands = parse_trace(read_file(path));
      const ReplayOutcome outcome = replay(commands, options, std::cout);
      for (const std::string& line : outcome.log)
        if (verbose || outcome.exit_code != kExitOk) std::cerr << line << '\n';
      return outcome.exit_code;
    }

    if (*dump_cmd) {
      emit_snapshot(std::cout, snapshot(init_arena(to_config(dump_flags))), dump_flags.format);
      return kExitOk;
    }

    if (*load_cmd) {
      const auto base = parse_hex(load_base);
      const auto capacity = parse_byte_size(load_capacity);
      if (!base || !capacity) throw UsageError("bad --base or --capacity");
      const Arena arena = load_snapshot(parse_csv(read_file(snapshot_path)), *base, *capacity);
      const InvariantReport report = check_invariants(arena);
      if (!report.ok()) {
        std::cerr << report;
        return kExitViolation;
      }
      emit_snapshot(std::cout, snapshot(arena), load_format);
      return kExitOk;
    }

    if (*bench_cmd) {
      if (compare && bench_cmd->count("--mode") > 0) throw UsageError("--compare runs both modes; drop --mode");
      wl.arena = to_config(bench_flags);
      const std::vector<std::uint64_t> counts = parse_request_list(requests);
      wl.requests = counts.front();
      validate(wl);
      std::ostringstream csv;
      if (compare) {
        const ComparisonReport report = compare_modes(wl, counts);
        write_comparison_csv(csv, report);
        std::cerr << "mean t_imp_pct " << report.mean_t_imp_pct << ", total-time t_imp_pct "
                  << report.total_time_imp_pct << '\n';
      } else {
        std::vector<BenchReport> reports;
        for (std::uint64_t n : counts) {
          WorkloadConfig c = wl;
          c.requests = n;
          reports.push_back(run_workload(wl.arena.mode, c));
        }
        write_bench_csv(csv, reports);
      }
      if (bench_flags.format == "table")
        write_aligned(std::cout, csv.str());
      else
        std::cout << csv.str();
      return kExitOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CorruptionError& e) {
    std::cerr << e.what() << '\n';
    return kExitViolation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
