// SPDX-FileCopyrightText: Copyright (c) 2026 The hfalloc Authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hfalloc {

/// Size of the serialized per-block bookkeeping record.
inline constexpr std::uint64_t kHeaderSize = 16;

/// Every block offset and every at-rest block size is a multiple of this.
inline constexpr std::uint64_t kAlignment = 8;

enum class Mode { HeadFirst, NonHeadFirst };

enum class Layout {
  SingleBlock,
  // Two free blocks splitting the arena in halves, as in the classic
  // 16 MiB initialization table (8388584 / 8388600).
  TwoBlock,
};

/// Raised for invalid arena or workload configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct AllocatorConfig {
  Mode mode = Mode::NonHeadFirst;
  std::uint64_t capacity = 16ULL * 1024 * 1024;
  Layout layout = Layout::SingleBlock;
  std::uint64_t base_address = 0;
  // SpaceFit carves a new free block only when the surplus exceeds
  // carve_threshold_multiplier * kHeaderSize.
  std::uint64_t carve_threshold_multiplier = 3;
  // In head-first mode, take the first free block of the chain when it fits
  // instead of scanning the whole chain for the best fit.
  bool head_fast_path = true;
};

inline std::string_view to_string(Mode mode) {
  return mode == Mode::HeadFirst ? "head-first" : "non-head-first";
}

inline std::string_view to_string(Layout layout) {
  return layout == Layout::SingleBlock ? "single" : "two-block";
}

inline std::optional<Mode> parse_mode(std::string_view text) {
  if (text == "head-first") return Mode::HeadFirst;
  if (text == "non-head-first") return Mode::NonHeadFirst;
  return std::nullopt;
}

inline std::optional<Layout> parse_layout(std::string_view text) {
  if (text == "single" || text == "single-block") return Layout::SingleBlock;
  if (text == "two-block") return Layout::TwoBlock;
  return std::nullopt;
}

}  // namespace hfalloc
