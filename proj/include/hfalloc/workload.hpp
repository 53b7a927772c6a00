// SPDX-FileCopyrightText: Copyright (c) 2026 The hfalloc Authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "hfalloc/allocator.hpp"
#include "hfalloc/inspector.hpp"

namespace hfalloc {

struct WorkloadConfig {
  std::uint64_t requests = 10000;
  std::uint32_t max_alloc_bytes = 1024;
  double alloc_probability = 0.5;
  unsigned workers = 1;
  std::uint64_t seed = 1;
  unsigned repetitions = 5;
  AllocatorConfig arena;
};

inline void validate(const WorkloadConfig& config) {
  if (config.requests < 1) throw ConfigError("requests must be >= 1");
  if (config.max_alloc_bytes < 1) throw ConfigError("max alloc bytes must be >= 1");
  if (!(config.alloc_probability > 0.0 && config.alloc_probability < 1.0))
    throw ConfigError("alloc probability must be in (0, 1)");
  if (config.workers < 1) throw ConfigError("workers must be >= 1");
  if (config.repetitions < 1) throw ConfigError("repetitions must be >= 1");
  validate(config.arena);
  validate_arena_config(config.arena);
}

/// Raw random choices for one request; the free target is resolved later
/// against whatever is live when the request executes.
struct RequestDraw {
  bool alloc = true;
  std::uint32_t size = 0;  // in [1, max_alloc_bytes] for allocations
  std::uint64_t pick = 0;  // selects the free target
};

/// Seeded, deterministic source of request draws.
class RequestStream {
 public:
  RequestStream(std::uint64_t seed, std::uint32_t max_alloc_bytes, double alloc_probability)
      : rng_(seed), kind_(alloc_probability), size_(1, max_alloc_bytes) {}

  RequestDraw next() {
    RequestDraw d;
    d.alloc = kind_(rng_);
    d.size = d.alloc ? size_(rng_) : 0;
    d.pick = d.alloc ? 0 : rng_();
    return d;
  }

 private:
  std::mt19937_64 rng_;
  std::bernoulli_distribution kind_;
  std::uniform_int_distribution<std::uint32_t> size_;
};

struct LiveAllocation {
  std::uint64_t address = 0;
  std::uint32_t owner = 0;
};

/// Shared set of live allocations any worker may pick a free target from.
class LiveRegistry {
 public:
  void add(LiveAllocation a) {
    std::lock_guard lock(mutex_);
    live_.push_back(a);
  }

  /// Removes and returns the entry selected by `pick`; nullopt when empty.
  std::optional<LiveAllocation> take(std::uint64_t pick) {
    std::lock_guard lock(mutex_);
    if (live_.empty()) return std::nullopt;
    const std::size_t k = static_cast<std::size_t>(pick % live_.size());
    const LiveAllocation a = live_[k];
    live_[k] = live_.back();
    live_.pop_back();
    return a;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return live_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::vector<LiveAllocation> live_;
};

struct Request {
  enum class Kind { Alloc, Free };
  Kind kind = Kind::Alloc;
  std::uint32_t size = 0;
  std::optional<LiveAllocation> target;  // nullopt frees NULL
};

/// Turns a draw into a concrete request. A free drawn while nothing is live
/// targets NULL.
inline Request resolve(const RequestDraw& draw, LiveRegistry& live) {
  if (draw.alloc) return Request{Request::Kind::Alloc, draw.size, std::nullopt};
  return Request{Request::Kind::Free, 0, live.take(draw.pick)};
}

inline Request generate_request(RequestStream& stream, LiveRegistry& live) {
  return resolve(stream.next(), live);
}

struct RepetitionResult {
  double seconds = 0;
  std::uint64_t allocs = 0;
  std::uint64_t allocs_ok = 0;
  std::uint64_t frees = 0;
  std::uint64_t frees_ok = 0;
  FragReport fragmentation;
  bool invariants_ok = false;
};

struct RepetitionOutcome {
  RepetitionResult result;
  Arena final_arena;
};

/// Per-repetition seed; both modes see the same stream for a given repetition.
inline std::uint64_t repetition_seed(std::uint64_t seed, unsigned repetition) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(repetition)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (std::uint64_t{words[0]} << 32) | words[1];
}

/// Runs one repetition on a fresh arena: `workers` threads pull requests from
/// a shared pre-drawn stream until `requests` have been issued.
inline RepetitionOutcome run_repetition(Mode mode, const WorkloadConfig& config, unsigned repetition) {
  AllocatorConfig ac = config.arena;
  ac.mode = mode;
  Allocator allocator(ac);

  RequestStream stream(repetition_seed(config.seed, repetition), config.max_alloc_bytes,
                       config.alloc_probability);
  std::vector<RequestDraw> draws(config.requests);
  for (RequestDraw& d : draws) d = stream.next();

  LiveRegistry live;
  std::atomic<std::uint64_t> cursor{0};
  struct Counters {
    std::uint64_t allocs = 0, allocs_ok = 0, frees = 0, frees_ok = 0;
  };
  std::vector<Counters> counters(config.workers);

  const auto work = [&](unsigned worker) {
    Counters& c = counters[worker];
    const auto owner = static_cast<std::uint32_t>(worker + 1);
    for (;;) {
      const std::uint64_t idx = cursor.fetch_add(1, std::memory_order_relaxed);
      if (idx >= draws.size()) break;
      const Request req = resolve(draws[idx], live);
      if (req.kind == Request::Kind::Alloc) {
        ++c.allocs;
        const AllocResult r = allocator.create(req.size, owner);
        if (r.ok()) {
          ++c.allocs_ok;
          live.add(LiveAllocation{r.user_address, owner});
        }
      } else {
        ++c.frees;
        const FreeStatus s = req.target ? allocator.free(req.target->address, req.target->owner, false)
                                        : allocator.free(std::nullopt, owner, false);
        if (s == FreeStatus::Freed) ++c.frees_ok;
      }
    }
  };

  const auto start = std::chrono::steady_clock::now();
  if (config.workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(config.workers);
    for (unsigned w = 0; w < config.workers; ++w) pool.emplace_back(work, w);
  }
  const auto stop = std::chrono::steady_clock::now();

  RepetitionResult r;
  r.seconds = std::chrono::duration<double>(stop - start).count();
  for (const Counters& c : counters) {
    r.allocs += c.allocs;
    r.allocs_ok += c.allocs_ok;
    r.frees += c.frees;
    r.frees_ok += c.frees_ok;
  }
  Arena final_arena = allocator.arena_copy();
  r.fragmentation = fragmentation(final_arena);
  r.invariants_ok = check_invariants(final_arena).ok();
  return RepetitionOutcome{r, std::move(final_arena)};
}

struct BenchReport {
  Mode mode = Mode::NonHeadFirst;
  std::uint64_t requests = 0;
  double wall_time_seconds = 0;  // mean over repetitions
  double min_seconds = 0;
  double max_seconds = 0;
  double malloc_success_pct = 0;
  double free_success_pct = 0;
  double external_fragmentation_bytes = 0;  // mean of the end-state metric
  bool invariants_ok = true;
  std::vector<RepetitionResult> repetitions;
};

inline double percent(std::uint64_t ok, std::uint64_t total) {
  return total == 0 ? 100.0 : 100.0 * static_cast<double>(ok) / static_cast<double>(total);
}

inline BenchReport run_workload(Mode mode, const WorkloadConfig& config) {
  validate(config);
  BenchReport report;
  report.mode = mode;
  report.requests = config.requests;
  std::uint64_t allocs = 0, allocs_ok = 0, frees = 0, frees_ok = 0;
  double seconds = 0, frag = 0;
  for (unsigned rep = 0; rep < config.repetitions; ++rep) {
    const RepetitionResult r = run_repetition(mode, config, rep).result;
    report.repetitions.push_back(r);
    allocs += r.allocs;
    allocs_ok += r.allocs_ok;
    frees += r.frees;
    frees_ok += r.frees_ok;
    seconds += r.seconds;
    frag += static_cast<double>(r.fragmentation.external_fragmentation);
    report.invariants_ok = report.invariants_ok && r.invariants_ok;
  }
  const auto n = static_cast<double>(config.repetitions);
  report.wall_time_seconds = seconds / n;
  report.external_fragmentation_bytes = frag / n;
  report.malloc_success_pct = percent(allocs_ok, allocs);
  report.free_success_pct = percent(frees_ok, frees);
  const auto [lo, hi] = std::minmax_element(report.repetitions.begin(), report.repetitions.end(),
                                            [](const auto& a, const auto& b) { return a.seconds < b.seconds; });
  report.min_seconds = lo->seconds;
  report.max_seconds = hi->seconds;
  return report;
}

/// Percentage of `baseline` time saved by `candidate`.
inline double time_improvement_pct(double baseline_seconds, double candidate_seconds) {
  return 100.0 * (baseline_seconds - candidate_seconds) / baseline_seconds;
}

struct ComparisonRow {
  std::uint64_t requests = 0;
  BenchReport non_head_first;
  BenchReport head_first;
  double t_imp_pct = 0;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  double mean_t_imp_pct = 0;
  // Improvement of the summed head-first time over the summed non-head-first time.
  double total_time_imp_pct = 0;
};

inline ComparisonReport compare_modes(const WorkloadConfig& config, const std::vector<std::uint64_t>& request_counts) {
  ComparisonReport out;
  double sum_imp = 0, total_nhf = 0, total_hf = 0;
  for (std::uint64_t n : request_counts) {
    WorkloadConfig c = config;
    c.requests = n;
    ComparisonRow row;
    row.requests = n;
    row.non_head_first = run_workload(Mode::NonHeadFirst, c);
    row.head_first = run_workload(Mode::HeadFirst, c);
    row.t_imp_pct = time_improvement_pct(row.non_head_first.wall_time_seconds, row.head_first.wall_time_seconds);
    sum_imp += row.t_imp_pct;
    total_nhf += row.non_head_first.wall_time_seconds;
    total_hf += row.head_first.wall_time_seconds;
    out.rows.push_back(std::move(row));
  }
  if (!out.rows.empty()) {
    out.mean_t_imp_pct = sum_imp / static_cast<double>(out.rows.size());
    out.total_time_imp_pct = time_improvement_pct(total_nhf, total_hf);
  }
  return out;
}

inline constexpr std::string_view kBenchCsvHeader = "mode,requests,t_sec,malloc_pct,free_pct,ext_frag";

inline void write_bench_row(std::ostream& os, const BenchReport& r) {
  os << to_string(r.mode) << ',' << r.requests << ',' << std::fixed << std::setprecision(6) << r.wall_time_seconds
     << ',' << std::setprecision(2) << r.malloc_success_pct << ',' << r.free_success_pct << ','
     << r.external_fragmentation_bytes;
  os.unsetf(std::ios_base::floatfield);
}

inline void write_bench_csv(std::ostream& os, const std::vector<BenchReport>& reports) {
  os << kBenchCsvHeader << '\n';
  for (const BenchReport& r : reports) {
    write_bench_row(os, r);
    os << '\n';
  }
}

/// Both rows of a pair carry the pair's improvement.
inline void write_comparison_csv(std::ostream& os, const ComparisonReport& report) {
  os << kBenchCsvHeader << ",t_imp_pct\n";
  for (const ComparisonRow& row : report.rows) {
    for (const BenchReport* r : {&row.non_head_first, &row.head_first}) {
      write_bench_row(os, *r);
      os << ',' << std::fixed << std::setprecision(2) << row.t_imp_pct << '\n';
      os.unsetf(std::ios_base::floatfield);
    }
  }
}

}  // namespace hfalloc
