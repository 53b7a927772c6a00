// SPDX-FileCopyrightText: Copyright (c) 2026 The hfalloc Authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hfalloc/config.hpp"

namespace hfalloc {

/// Sentinel stored as the previous-block offset of the first block.
inline constexpr std::uint64_t kNoOffset = std::numeric_limits<std::uint64_t>::max();

/// Largest capacity whose offsets fit the packed 32-bit back-link (in 8-byte units).
inline constexpr std::uint64_t kMaxCapacity = kAlignment * 0xFFFFFFFEULL;

/// Position of a block header inside the arena (the "i" column of a dump).
struct BlockRef {
  std::uint64_t offset = 0;

  friend auto operator<=>(const BlockRef&, const BlockRef&) = default;
};

struct BlockHeader {
  bool is_free = true;
  std::uint32_t owner = 0;  // 0 = unowned
  std::uint64_t size = 0;   // addressable bytes, header excluded
  std::uint64_t prev_offset = kNoOffset;

  friend bool operator==(const BlockHeader&, const BlockHeader&) = default;
};

/// The block chain is in a state that no public operation can produce.
class CorruptionError : public std::runtime_error {
 public:
  CorruptionError(std::uint64_t offset, const std::string& what)
      : std::runtime_error("arena corruption at offset " + std::to_string(offset) + ": " + what),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

constexpr std::uint64_t align_up(std::uint64_t n) noexcept {
  return (n + kAlignment - 1) & ~(kAlignment - 1);
}

constexpr std::uint64_t align_down(std::uint64_t n) noexcept { return n & ~(kAlignment - 1); }

/// A contiguous simulated memory region holding a chain of blocks.
///
/// Each block is a 16-byte header followed by `size` addressable bytes; the
/// next block starts right after. Headers live inside the byte storage, packed
/// as:
///
///   bytes 0..7   size, with the free flag in bit 63
///   bytes 8..11  owner id
///   bytes 12..15 previous block offset / 8, 0xFFFFFFFF for none
///
/// The arena does not keep the chain consistent by itself; the allocator
/// functions are its only mutators.
class Arena {
 public:
  Arena(std::uint64_t base_address, std::uint64_t capacity)
      : base_address_(base_address), storage_(checked_capacity(capacity)) {}

  std::uint64_t base_address() const noexcept { return base_address_; }
  std::uint64_t capacity() const noexcept { return storage_.size(); }

  // Relocates the simulated region; back-links are offsets so nothing else moves.
  void set_base_address(std::uint64_t base) noexcept { base_address_ = base; }

  std::span<const std::byte> bytes() const noexcept { return storage_; }

  BlockRef first_block() const noexcept { return BlockRef{0}; }

  bool is_header_position(std::uint64_t offset) const noexcept {
    return offset % kAlignment == 0 && offset <= capacity() - kHeaderSize;
  }

  BlockHeader header(BlockRef block) const {
    require_position(block);
    std::uint64_t word = 0;
    std::uint32_t owner = 0;
    std::uint32_t prev = 0;
    const std::byte* p = storage_.data() + block.offset;
    std::memcpy(&word, p, sizeof word);
    std::memcpy(&owner, p + 8, sizeof owner);
    std::memcpy(&prev, p + 12, sizeof prev);
    BlockHeader h;
    h.is_free = (word >> 63) != 0;
    h.size = word & ~(1ULL << 63);
    h.owner = owner;
    h.prev_offset = prev == kPrevNone ? kNoOffset : std::uint64_t{prev} * kAlignment;
    return h;
  }

  void write_header(BlockRef block, const BlockHeader& h) {
    require_position(block);
    if (h.size >= (1ULL << 63)) throw CorruptionError(block.offset, "size does not fit header");
    if (h.prev_offset != kNoOffset && !is_header_position(h.prev_offset))
      throw CorruptionError(block.offset, "back-link is not a header position");
    const std::uint64_t word = h.size | (h.is_free ? 1ULL << 63 : 0);
    const std::uint32_t prev = h.prev_offset == kNoOffset
                                   ? kPrevNone
                                   : static_cast<std::uint32_t>(h.prev_offset / kAlignment);
    std::byte* p = storage_.data() + block.offset;
    std::memcpy(p, &word, sizeof word);
    std::memcpy(p + 8, &h.owner, sizeof h.owner);
    std::memcpy(p + 12, &prev, sizeof prev);
  }

  /// Address handed to the user for `block`: base + offset + header.
  std::uint64_t user_address(BlockRef block) const {
    if (!is_header_position(block.offset))
      throw std::logic_error("user_address: offset " + std::to_string(block.offset) +
                             " is not a block position");
    return base_address_ + block.offset + kHeaderSize;
  }

  std::optional<BlockRef> next_block(BlockRef block) const {
    const BlockHeader h = header(block);
    const std::uint64_t end = block.offset + kHeaderSize + h.size;
    if (end > capacity()) throw CorruptionError(block.offset, "block overruns the arena");
    if (end == capacity()) return std::nullopt;
    if (!is_header_position(end))
      throw CorruptionError(block.offset, "next header at " + std::to_string(end) + " is not placeable");
    return BlockRef{end};
  }

  std::optional<BlockRef> prev_block(BlockRef block) const {
    const BlockHeader h = header(block);
    if (h.prev_offset == kNoOffset) return std::nullopt;
    if (!is_header_position(h.prev_offset) || h.prev_offset >= block.offset)
      throw CorruptionError(block.offset,
                            "back-link " + std::to_string(h.prev_offset) + " is not a prior header");
    return BlockRef{h.prev_offset};
  }

  /// Linear scan of the chain for the block whose user address is `addr`.
  std::optional<BlockRef> find_block_by_user_address(std::uint64_t addr) const {
    if (addr < base_address_ + kHeaderSize || addr - base_address_ > capacity()) return std::nullopt;
    if ((addr - base_address_) % kAlignment != 0) return std::nullopt;
    for (std::optional<BlockRef> b = first_block(); b; b = next_block(*b)) {
      const std::uint64_t user = base_address_ + b->offset + kHeaderSize;
      if (user == addr) return b;
      if (user > addr) break;
    }
    return std::nullopt;
  }

  template <typename Fn>
  void for_each_block(Fn&& fn) const {
    for (std::optional<BlockRef> b = first_block(); b; b = next_block(*b)) fn(*b, header(*b));
  }

  std::optional<BlockRef> last_block() const {
    std::optional<BlockRef> last;
    for (std::optional<BlockRef> b = first_block(); b; b = next_block(*b)) last = b;
    return last;
  }

  static std::size_t checked_capacity(std::uint64_t capacity) {
    if (capacity < 2 * kHeaderSize + 16)
      throw ConfigError("arena capacity " + std::to_string(capacity) + " is below the minimum of " +
                        std::to_string(2 * kHeaderSize + 16) + " bytes");
    if (capacity % kAlignment != 0)
      throw ConfigError("arena capacity " + std::to_string(capacity) + " is not a multiple of 8");
    if (capacity > kMaxCapacity)
      throw ConfigError("arena capacity " + std::to_string(capacity) + " exceeds the supported maximum");
    return static_cast<std::size_t>(capacity);
  }

 private:
  static constexpr std::uint32_t kPrevNone = 0xFFFFFFFFU;

  void require_position(BlockRef block) const {
    if (!is_header_position(block.offset)) throw CorruptionError(block.offset, "not a header position");
  }

  std::uint64_t base_address_;
  std::vector<std::byte> storage_;
};

/// Throws ConfigError when `config` cannot produce an arena.
inline void validate_arena_config(const AllocatorConfig& config) {
  (void)Arena::checked_capacity(config.capacity);
  // The second block starts at capacity/2 - 8, which must stay 8-aligned.
  if (config.layout == Layout::TwoBlock && config.capacity % (2 * kAlignment) != 0)
    throw ConfigError("two-block layout needs a capacity that is a multiple of 16");
}

/// Builds a fresh arena with the configured initial layout.
inline Arena init_arena(const AllocatorConfig& config) {
  validate_arena_config(config);
  Arena arena(config.base_address, config.capacity);
  const std::uint64_t capacity = config.capacity;
  if (config.layout == Layout::SingleBlock) {
    arena.write_header(arena.first_block(), BlockHeader{true, 0, capacity - kHeaderSize, kNoOffset});
    return arena;
  }
  const std::uint64_t half = capacity / 2;
  const std::uint64_t first_size = half - 2 * kHeaderSize + 8;
  const BlockRef second{kHeaderSize + first_size};
  arena.write_header(arena.first_block(), BlockHeader{true, 0, first_size, kNoOffset});
  arena.write_header(second, BlockHeader{true, 0, half - 8, 0});
  return arena;
}

}  // namespace hfalloc
