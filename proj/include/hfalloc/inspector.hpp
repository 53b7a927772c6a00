// SPDX-FileCopyrightText: Copyright (c) 2026 The hfalloc Authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hfalloc/arena.hpp"

namespace hfalloc {

/// One line of a block table: header offset, user address, user address of
/// the left neighbour (0 for the first block), free flag, addressable size.
struct SnapshotRow {
  std::uint64_t i = 0;
  std::uint64_t address = 0;
  std::uint64_t left_addr = 0;
  bool free = false;
  std::uint64_t size = 0;

  friend bool operator==(const SnapshotRow&, const SnapshotRow&) = default;
};

using Snapshot = std::vector<SnapshotRow>;

/// Rows rejected by load_snapshot or the CSV reader.
class SnapshotError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline Snapshot snapshot(const Arena& arena) {
  Snapshot rows;
  std::uint64_t left = 0;
  arena.for_each_block([&](BlockRef b, const BlockHeader& h) {
    const std::uint64_t addr = arena.user_address(b);
    if (h.prev_offset != (rows.empty() ? kNoOffset : rows.back().i))
      throw CorruptionError(b.offset, "back-link does not name the previous block");
    rows.push_back(SnapshotRow{b.offset, addr, left, h.is_free, h.size});
    left = addr;
  });
  return rows;
}

/// Rebuilds an arena whose snapshot() equals `rows`. Allocated blocks get
/// `default_owner`.
inline Arena load_snapshot(const Snapshot& rows, std::uint64_t base, std::uint64_t capacity,
                           std::uint32_t default_owner = 1) {
  if (rows.empty()) throw SnapshotError("snapshot has no rows");
  Arena arena(base, capacity);
  std::uint64_t expected_i = 0;
  std::uint64_t expected_left = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const SnapshotRow& r = rows[k];
    const auto fail = [&](const std::string& what) {
      throw SnapshotError("row " + std::to_string(k + 1) + " (i=" + std::to_string(r.i) + "): " + what);
    };
    if (r.i != expected_i) fail("expected i=" + std::to_string(expected_i));
    if (r.i % kAlignment != 0) fail("i is not a multiple of 8");
    if (r.size % kAlignment != 0) fail("size is not a multiple of 8");
    if (r.address != base + r.i + kHeaderSize) fail("address does not equal base + i + 16");
    if (r.left_addr != expected_left) fail("left_addr does not match the previous row");
    if (r.size > capacity || r.i + kHeaderSize + r.size > capacity) fail("block runs past the capacity");
    arena.write_header(BlockRef{r.i}, BlockHeader{r.free, r.free ? 0U : default_owner, r.size,
                                                  k == 0 ? kNoOffset : rows[k - 1].i});
    expected_i = r.i + kHeaderSize + r.size;
    expected_left = r.address;
  }
  if (expected_i != capacity)
    throw SnapshotError("rows cover " + std::to_string(expected_i) + " bytes, capacity is " +
                        std::to_string(capacity));
  return arena;
}

inline std::string to_hex(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

inline constexpr std::string_view kSnapshotCsvHeader = "i,address,left_addr,free,size";

inline void write_csv(std::ostream& os, const Snapshot& rows) {
  os << kSnapshotCsvHeader << '\n';
  for (const SnapshotRow& r : rows)
    os << r.i << ',' << to_hex(r.address) << ',' << to_hex(r.left_addr) << ',' << (r.free ? "yes" : "no")
       << ',' << r.size << '\n';
}

inline std::string to_csv(const Snapshot& rows) {
  std::ostringstream os;
  write_csv(os, rows);
  return os.str();
}

/// Aligned, human-readable block table with the same five columns.
inline void write_table(std::ostream& os, const Snapshot& rows) {
  std::vector<std::vector<std::string>> cells{{"i", "Address", "Left Addr.", "Free?", "Size"}};
  for (const SnapshotRow& r : rows)
    cells.push_back({std::to_string(r.i), to_hex(r.address), to_hex(r.left_addr), r.free ? "yes" : "no",
                     std::to_string(r.size)});
  std::vector<std::size_t> width(5, 0);
  for (const auto& line : cells)
    for (std::size_t c = 0; c < 5; ++c) width[c] = std::max(width[c], line[c].size());
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < 5; ++c) {
      if (c > 0) os << "  ";
      os << std::setw(static_cast<int>(width[c])) << line[c];
    }
    os << '\n';
  }
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

inline bool parse_u64(std::string_view s, std::uint64_t& out, int base = 10) {
  if (base == 16) {
    if (s.size() < 3 || s[0] != '0' || (s[1] != 'x' && s[1] != 'X')) return false;
    s.remove_prefix(2);
  }
  if (s.empty()) return false;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out, base);
  return ec == std::errc{} && p == s.data() + s.size();
}

}  // namespace detail

/// Reads the CSV written by write_csv. Blank lines and '#' comments are skipped.
inline Snapshot parse_csv(std::string_view text) {
  Snapshot rows;
  bool saw_header = false;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = detail::trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto fail = [&](const std::string& what) {
      throw SnapshotError("line " + std::to_string(line_no) + ": " + what);
    };
    if (!saw_header) {
      if (line != kSnapshotCsvHeader) fail("expected header '" + std::string(kSnapshotCsvHeader) + "'");
      saw_header = true;
      continue;
    }
    std::vector<std::string_view> fields;
    for (std::size_t start = 0;;) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(detail::trim(line.substr(start, comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 5) fail("expected 5 fields, got " + std::to_string(fields.size()));
    SnapshotRow r;
    if (!detail::parse_u64(fields[0], r.i)) fail("bad i '" + std::string(fields[0]) + "'");
    if (!detail::parse_u64(fields[1], r.address, 16)) fail("bad address '" + std::string(fields[1]) + "'");
    if (!detail::parse_u64(fields[2], r.left_addr, 16)) fail("bad left_addr '" + std::string(fields[2]) + "'");
    if (fields[3] == "yes")
      r.free = true;
    else if (fields[3] == "no")
      r.free = false;
    else
      fail("free must be yes or no");
    if (!detail::parse_u64(fields[4], r.size)) fail("bad size '" + std::string(fields[4]) + "'");
    rows.push_back(r);
  }
  if (!saw_header) throw SnapshotError("missing header line");
  return rows;
}

struct FragReport {
  std::uint64_t total_free_bytes = 0;
  std::uint64_t largest_free_block = 0;
  std::uint64_t external_fragmentation = 0;  // total_free_bytes - largest_free_block
  std::uint64_t free_block_count = 0;

  friend bool operator==(const FragReport&, const FragReport&) = default;
};

inline FragReport fragmentation(const Arena& arena) {
  FragReport f;
  arena.for_each_block([&](BlockRef, const BlockHeader& h) {
    if (!h.is_free) return;
    f.total_free_bytes += h.size;
    f.largest_free_block = std::max(f.largest_free_block, h.size);
    ++f.free_block_count;
  });
  f.external_fragmentation = f.total_free_bytes - f.largest_free_block;
  return f;
}

enum class ViolationKind { Tiling, LinkSymmetry, Alignment, Traversal };

inline std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::Tiling: return "TILING";
    case ViolationKind::LinkSymmetry: return "LINK_SYMMETRY";
    case ViolationKind::Alignment: return "ALIGNMENT";
    case ViolationKind::Traversal: return "TRAVERSAL";
  }
  return "?";
}

struct Violation {
  ViolationKind kind;
  std::uint64_t offset;  // block where the breach was seen
  std::string detail;
};

struct InvariantReport {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
};

inline std::ostream& operator<<(std::ostream& os, const InvariantReport& r) {
  if (r.ok()) return os << "ok";
  for (const Violation& v : r.violations)
    os << to_string(v.kind) << " at " << v.offset << ": " << v.detail << '\n';
  return os;
}

/// Walks the chain without trusting it and reports every breach of tiling,
/// back-link symmetry, alignment and traversal closure.
inline InvariantReport check_invariants(const Arena& arena) {
  InvariantReport report;
  const auto add = [&](ViolationKind k, std::uint64_t off, std::string what) {
    report.violations.push_back(Violation{k, off, std::move(what)});
  };
  const std::uint64_t capacity = arena.capacity();
  std::uint64_t offset = 0;
  std::uint64_t prev = kNoOffset;
  while (true) {
    if (offset % kAlignment != 0) {
      add(ViolationKind::Alignment, offset, "block offset is not a multiple of 8");
      break;
    }
    if (offset > capacity - kHeaderSize) {
      add(ViolationKind::Traversal, offset,
          "walk stopped " + std::to_string(capacity - offset) + " bytes short of the arena end");
      break;
    }
    const BlockHeader h = arena.header(BlockRef{offset});
    if (h.size % kAlignment != 0)
      add(ViolationKind::Alignment, offset, "size " + std::to_string(h.size) + " is not a multiple of 8");
    if (h.prev_offset != prev) {
      add(ViolationKind::LinkSymmetry, offset,
          "links back to " + (h.prev_offset == kNoOffset ? std::string("none") : std::to_string(h.prev_offset)) +
              " but the previous block is " + (prev == kNoOffset ? std::string("none") : std::to_string(prev)));
    }
    if (h.size > capacity - offset - kHeaderSize) {
      add(ViolationKind::Tiling, offset,
          "block of size " + std::to_string(h.size) + " overruns capacity " + std::to_string(capacity));
      break;
    }
    const std::uint64_t end = offset + kHeaderSize + h.size;
    if (end == capacity) break;
    prev = offset;
    offset = end;
  }
  return report;
}

}  // namespace hfalloc
