// SPDX-FileCopyrightText: Copyright (c) 2026 The hfalloc Authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string_view>
#include <utility>

#include "hfalloc/arena.hpp"
#include "hfalloc/config.hpp"

namespace hfalloc {

enum class AllocStatus { Ok, OutOfMemory, InvalidRequest };

struct AllocResult {
  AllocStatus status = AllocStatus::InvalidRequest;
  std::optional<BlockRef> block;  // set iff status == Ok
  std::uint64_t user_address = 0;  // set iff status == Ok

  bool ok() const noexcept { return status == AllocStatus::Ok; }
};

enum class FreeStatus { Freed, Unallocated, Segfault };

inline std::string_view to_string(AllocStatus s) {
  switch (s) {
    case AllocStatus::Ok: return "OK";
    case AllocStatus::OutOfMemory: return "OUT_OF_MEMORY";
    case AllocStatus::InvalidRequest: return "INVALID_REQUEST";
  }
  return "?";
}

inline std::string_view to_string(FreeStatus s) {
  switch (s) {
    case FreeStatus::Freed: return "FREED";
    case FreeStatus::Unallocated: return "UNALLOCATED";
    case FreeStatus::Segfault: return "SEGFAULT";
  }
  return "?";
}

/// Rounds a request up to the next double word.
constexpr std::uint64_t double_align(std::uint64_t n) noexcept { return align_up(n); }

namespace detail {

inline void set_prev_link(Arena& arena, std::optional<BlockRef> block, std::uint64_t prev_offset) {
  if (!block) return;
  BlockHeader h = arena.header(*block);
  h.prev_offset = prev_offset;
  arena.write_header(*block, h);
}

// Absorbs `right` (header included) into `left`. Both must be adjacent.
inline void merge(Arena& arena, BlockRef left, BlockRef right) {
  const std::optional<BlockRef> after = arena.next_block(right);
  BlockHeader lh = arena.header(left);
  lh.size += kHeaderSize + arena.header(right).size;
  arena.write_header(left, lh);
  set_prev_link(arena, after, left.offset);
}

}  // namespace detail

/// Smallest free block with size >= req; lowest offset wins ties.
inline std::optional<BlockRef> find_best_fit(const Arena& arena, std::uint64_t req) {
  std::optional<BlockRef> best;
  std::uint64_t best_size = 0;
  for (std::optional<BlockRef> b = arena.first_block(); b; b = arena.next_block(*b)) {
    const BlockHeader h = arena.header(*b);
    if (!h.is_free || h.size < req) continue;
    if (!best || h.size < best_size) {
      best = b;
      best_size = h.size;
      if (best_size == req) break;  // nothing can beat an exact fit at a lower offset
    }
  }
  return best;
}

/// First free block from the head of the chain, if it fits `req`.
inline std::optional<BlockRef> find_head_block(const Arena& arena, std::uint64_t req) {
  for (std::optional<BlockRef> b = arena.first_block(); b; b = arena.next_block(*b)) {
    const BlockHeader h = arena.header(*b);
    if (h.is_free) return h.size >= req ? b : std::nullopt;
  }
  return std::nullopt;
}

/// Coalesces adjacent free blocks walking from the last block toward the
/// first, then retries the best-fit search.
inline std::optional<BlockRef> stitch(Arena& arena, std::uint64_t req) {
  std::optional<BlockRef> cur = arena.last_block();
  while (cur) {
    const std::optional<BlockRef> prev = arena.prev_block(*cur);
    if (!prev) break;
    if (arena.header(*prev).is_free && arena.header(*cur).is_free) detail::merge(arena, *prev, *cur);
    cur = prev;
  }
  return find_best_fit(arena, req);
}

/// Splits a free block in two halves when the first half still fits `req`.
/// The half is rounded down to 8 bytes; the remainder goes to the second block.
inline BlockRef chunk_up(Arena& arena, BlockRef block, std::uint64_t req) {
  BlockHeader h = arena.header(block);
  if (!h.is_free || h.size < kHeaderSize) return block;
  const std::uint64_t half = align_down((h.size - kHeaderSize) / 2);
  if (half < req || half < kAlignment) return block;

  const std::optional<BlockRef> after = arena.next_block(block);
  const BlockRef second{block.offset + kHeaderSize + half};
  const std::uint64_t second_size = h.size - kHeaderSize - half;
  h.size = half;
  arena.write_header(block, h);
  arena.write_header(second, BlockHeader{true, 0, second_size, block.offset});
  detail::set_prev_link(arena, after, second.offset);
  return block;
}

/// Moves the bytes of `block` beyond `req` somewhere useful: into a free right
/// neighbour, else into a free left neighbour (the block slides up), else into
/// a new free block carved at the low end when the surplus is large enough.
/// Returns the block that now holds exactly `req` bytes, or `block` unchanged.
inline BlockRef space_fit(Arena& arena, BlockRef block, std::uint64_t req,
                          std::uint64_t carve_threshold_multiplier = 3) {
  BlockHeader h = arena.header(block);
  if (h.size <= req) return block;
  const std::uint64_t extra = h.size - req;
  const std::optional<BlockRef> next = arena.next_block(block);

  if (next && arena.header(*next).is_free) {
    BlockHeader nh = arena.header(*next);
    const std::optional<BlockRef> after = arena.next_block(*next);
    const BlockRef moved{block.offset + kHeaderSize + req};
    nh.size += extra;
    nh.prev_offset = block.offset;
    h.size = req;
    arena.write_header(block, h);
    arena.write_header(moved, nh);
    detail::set_prev_link(arena, after, moved.offset);
    return block;
  }

  const std::optional<BlockRef> prev = arena.prev_block(block);
  if (prev && arena.header(*prev).is_free) {
    BlockHeader ph = arena.header(*prev);
    ph.size += extra;
    arena.write_header(*prev, ph);
    const BlockRef moved{block.offset + extra};
    h.size = req;
    arena.write_header(moved, h);
    detail::set_prev_link(arena, next, moved.offset);
    return moved;
  }

  if (extra > carve_threshold_multiplier * kHeaderSize) {
    const BlockRef shrunk{block.offset + extra};
    arena.write_header(block, BlockHeader{true, 0, extra - kHeaderSize, h.prev_offset});
    h.size = req;
    h.prev_offset = block.offset;
    arena.write_header(shrunk, h);
    detail::set_prev_link(arena, next, shrunk.offset);
    return shrunk;
  }

  return block;
}

/// Reserves `req_size` bytes for `owner`. Not synchronized; see Allocator.
inline AllocResult create(Arena& arena, const AllocatorConfig& config, std::int64_t req_size,
                          std::uint32_t owner) {
  if (req_size <= 0 || owner == 0) return AllocResult{AllocStatus::InvalidRequest, std::nullopt, 0};
  const std::uint64_t req = double_align(static_cast<std::uint64_t>(req_size));

  std::optional<BlockRef> block;
  if (config.mode == Mode::HeadFirst && config.head_fast_path) block = find_head_block(arena, req);
  if (!block) block = find_best_fit(arena, req);
  if (!block) block = stitch(arena, req);
  if (!block) return AllocResult{AllocStatus::OutOfMemory, std::nullopt, 0};

  if (arena.header(*block).size > req) {
    if (config.mode == Mode::NonHeadFirst) block = chunk_up(arena, *block, req);
    block = space_fit(arena, *block, req, config.carve_threshold_multiplier);
  }

  BlockHeader h = arena.header(*block);
  h.is_free = false;
  h.owner = owner;
  arena.write_header(*block, h);
  return AllocResult{AllocStatus::Ok, block, arena.user_address(*block)};
}

/// Releases the block whose user address is `user_addr` and merges it with
/// free neighbours, left first. Not synchronized; see Allocator.
inline FreeStatus free_block(Arena& arena, std::optional<std::uint64_t> user_addr, std::uint32_t caller,
                             bool is_forced) {
  if (!user_addr) return FreeStatus::Unallocated;
  const std::optional<BlockRef> found = arena.find_block_by_user_address(*user_addr);
  if (!found) return FreeStatus::Unallocated;
  BlockHeader h = arena.header(*found);
  if (h.is_free) return FreeStatus::Unallocated;
  if (h.owner != caller && !is_forced) return FreeStatus::Segfault;

  h.is_free = true;
  h.owner = 0;
  arena.write_header(*found, h);

  BlockRef cur = *found;
  if (const auto prev = arena.prev_block(cur); prev && arena.header(*prev).is_free) {
    detail::merge(arena, *prev, cur);
    cur = *prev;
  }
  if (const auto next = arena.next_block(cur); next && arena.header(*next).is_free)
    detail::merge(arena, cur, *next);
  return FreeStatus::Freed;
}

inline void validate(const AllocatorConfig& config) {
  if (config.carve_threshold_multiplier < 1) throw ConfigError("carve threshold multiplier must be >= 1");
}

/// Thread-safe allocator over one arena. Every operation runs under a single
/// exclusive lock, so effects are linearizable.
class Allocator {
 public:
  explicit Allocator(const AllocatorConfig& config) : config_(config), arena_(make_arena(config)) {}

  // Adopts an existing arena (e.g. one loaded from a snapshot).
  Allocator(const AllocatorConfig& config, Arena arena) : config_(config), arena_(std::move(arena)) {
    validate(config_);
    config_.capacity = arena_.capacity();
    config_.base_address = arena_.base_address();
  }

  Allocator(const Allocator&) = delete;
  Allocator& operator=(const Allocator&) = delete;

  AllocResult create(std::int64_t req_size, std::uint32_t owner) {
    std::lock_guard lock(mutex_);
    return hfalloc::create(arena_, config_, req_size, owner);
  }

  FreeStatus free(std::optional<std::uint64_t> user_addr, std::uint32_t caller, bool is_forced = false) {
    std::lock_guard lock(mutex_);
    return free_block(arena_, user_addr, caller, is_forced);
  }

  /// Runs `fn` on the arena under the lock and returns its result.
  template <typename Fn>
  decltype(auto) inspect(Fn&& fn) const {
    std::lock_guard lock(mutex_);
    return std::forward<Fn>(fn)(std::as_const(arena_));
  }

  /// Mutable access under the lock; for tests and trace tooling.
  template <typename Fn>
  decltype(auto) with_arena(Fn&& fn) {
    std::lock_guard lock(mutex_);
    return std::forward<Fn>(fn)(arena_);
  }

  Arena arena_copy() const {
    std::lock_guard lock(mutex_);
    return arena_;
  }

  const AllocatorConfig& config() const noexcept { return config_; }
  Mode mode() const noexcept { return config_.mode; }

 private:
  static Arena make_arena(const AllocatorConfig& config) {
    validate(config);
    return init_arena(config);
  }

  mutable std::mutex mutex_;
  AllocatorConfig config_;
  Arena arena_;
};

}  // namespace hfalloc
