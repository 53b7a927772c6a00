// SPDX-FileCopyrightText: Copyright (c) 2026 The hfalloc Authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace hfalloc {
namespace {

using testing::k16MiB;

AllocatorConfig arena_config(std::uint64_t capacity, Layout layout, std::uint64_t base = 0) {
  AllocatorConfig c;
  c.capacity = capacity;
  c.layout = layout;
  c.base_address = base;
  return c;
}

TEST(ArenaInit, TwoBlockSixteenMiBMatchesInitTable) {
  const Arena a = init_arena(arena_config(k16MiB, Layout::TwoBlock, 0x143000000));
  const BlockHeader first = a.header(BlockRef{0});
  EXPECT_TRUE(first.is_free);
  EXPECT_EQ(first.size, 8388584u);
  EXPECT_EQ(first.prev_offset, kNoOffset);
  const auto second = a.next_block(BlockRef{0});
  ASSERT_TRUE(second);
  EXPECT_EQ(second->offset, 8388600u);
  EXPECT_EQ(a.header(*second).size, 8388600u);
  EXPECT_EQ(a.header(*second).prev_offset, 0u);
  EXPECT_FALSE(a.next_block(*second));
  EXPECT_EQ(0 + kHeaderSize + 8388584, 8388600u);
  EXPECT_EQ(8388600 + kHeaderSize + 8388600, k16MiB);
}

TEST(ArenaInit, SingleBlock) {
  const Arena big = init_arena(arena_config(k16MiB, Layout::SingleBlock));
  EXPECT_EQ(big.header(BlockRef{0}).size, 16777200u);
  EXPECT_FALSE(big.next_block(BlockRef{0}));

  const Arena small = init_arena(arena_config(64, Layout::SingleBlock));
  EXPECT_EQ(small.header(BlockRef{0}).size, 48u);
  EXPECT_TRUE(small.header(BlockRef{0}).is_free);
}

TEST(ArenaInit, TwoBlockGeneralCapacityTiles) {
  for (std::uint64_t cap : {48ULL, 64ULL, 160ULL, 4096ULL, 1ULL << 20}) {
    const Arena a = init_arena(arena_config(cap, Layout::TwoBlock));
    const std::uint64_t first = a.header(BlockRef{0}).size;
    EXPECT_EQ(first, cap / 2 - 2 * kHeaderSize + 8) << cap;
    const auto second = a.next_block(BlockRef{0});
    ASSERT_TRUE(second);
    EXPECT_EQ(a.header(*second).size, cap / 2 - 8);
    EXPECT_EQ(second->offset + kHeaderSize + a.header(*second).size, cap);
  }
}

TEST(ArenaInit, RejectsBadCapacity) {
  EXPECT_THROW(init_arena(arena_config(40, Layout::SingleBlock)), ConfigError);
  EXPECT_THROW(init_arena(arena_config(68, Layout::SingleBlock)), ConfigError);
  EXPECT_THROW(init_arena(arena_config(72, Layout::TwoBlock)), ConfigError);  // 72/2 - 8 is misaligned
  EXPECT_THROW(init_arena(arena_config(kMaxCapacity + 8, Layout::SingleBlock)), ConfigError);
  EXPECT_NO_THROW(init_arena(arena_config(48, Layout::SingleBlock)));
}

TEST(ArenaAddress, UserAddressAddsHeader) {
  Arena a = init_arena(arena_config(k16MiB, Layout::TwoBlock, 0x143000000));
  EXPECT_EQ(a.user_address(BlockRef{0}), 0x143000010u);
  EXPECT_EQ(a.user_address(BlockRef{8388600}), 0x143800008u);
  a.set_base_address(0);
  EXPECT_EQ(a.user_address(BlockRef{24}), 40u);
  EXPECT_THROW((void)a.user_address(BlockRef{3}), std::logic_error);
  EXPECT_THROW((void)a.user_address(BlockRef{k16MiB}), std::logic_error);
}

TEST(ArenaTraversal, NextAndPrevFollowTables) {
  const Arena nhf = testing::load_table("alloc32_non_head_first.csv");
  ASSERT_EQ(nhf.header(BlockRef{48}).size, 32u);
  EXPECT_EQ(nhf.next_block(BlockRef{48}), BlockRef{96});
  EXPECT_EQ(nhf.prev_block(BlockRef{96}), BlockRef{48});
  EXPECT_FALSE(nhf.prev_block(BlockRef{0}));
  EXPECT_FALSE(nhf.next_block(BlockRef{8388600}));

  const Arena hf = testing::load_table("alloc32_head_first.csv");
  EXPECT_EQ(hf.next_block(BlockRef{24}), BlockRef{16776968});

  const Arena layout = testing::load_table("head_first_layout.csv");
  EXPECT_EQ(layout.prev_block(BlockRef{16777016}), BlockRef{24});
}

TEST(ArenaTraversal, CorruptLinksThrow) {
  Arena a = init_arena(arena_config(256, Layout::SingleBlock));
  BlockHeader h = a.header(BlockRef{0});
  h.size = 512;
  a.write_header(BlockRef{0}, h);
  EXPECT_THROW((void)a.next_block(BlockRef{0}), CorruptionError);

  Arena b = init_arena(arena_config(256, Layout::TwoBlock));
  ASSERT_EQ(b.next_block(BlockRef{0}), BlockRef{120});
  BlockHeader second = b.header(BlockRef{120});
  second.prev_offset = 200;  // points forward
  b.write_header(BlockRef{120}, second);
  EXPECT_THROW((void)b.prev_block(BlockRef{120}), CorruptionError);
}

TEST(ArenaLookup, FindByUserAddress) {
  const Arena a = testing::load_table("alloc32_non_head_first.csv");
  EXPECT_EQ(a.find_block_by_user_address(0x12c000040), BlockRef{48});
  EXPECT_EQ(a.find_block_by_user_address(0x12c000010), BlockRef{0});
  EXPECT_FALSE(a.find_block_by_user_address(0x12c000000 + 7));
  EXPECT_FALSE(a.find_block_by_user_address(0x12c000000 + 56));  // inside a block
  EXPECT_FALSE(a.find_block_by_user_address(0x12c000000 + k16MiB + 100));
  EXPECT_FALSE(a.find_block_by_user_address(0));
}

TEST(ArenaHeader, RoundTripsPackedFields) {
  Arena a(0, 1 << 12);
  const BlockHeader h{false, 0xDEADBEEF, 4000, 2048};
  a.write_header(BlockRef{64}, h);
  EXPECT_EQ(a.header(BlockRef{64}), h);
  const BlockHeader first{true, 0, 8, kNoOffset};
  a.write_header(BlockRef{0}, first);
  EXPECT_EQ(a.header(BlockRef{0}), first);
  EXPECT_THROW(a.write_header(BlockRef{12}, h), CorruptionError);
}

}  // namespace
}  // namespace hfalloc
