/*
 * Copyright 2026 The brsvd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <future>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "brsvd/types.hpp"

namespace brsvd {

/// Exact non-negative rational, kept reduced.
struct Rational {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  static Rational make(std::uint64_t num, std::uint64_t den) {
    if (den == 0) throw std::invalid_argument("Rational: zero denominator");
    const auto g = std::gcd(num, den);
    return g == 0 ? Rational{0, 1} : Rational{num / g, den / g};
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool is_integer(std::uint64_t k) const { return den == 1 && num == k; }
  friend bool operator==(const Rational&, const Rational&) = default;
};

struct StageRecord {
  std::string stage;
  std::uint64_t words_read = 0;
  std::uint64_t words_written = 0;
  double seconds = 0.0;
};

/**
 * Traffic between the store and working memory, in matrix elements.
 *
 * matrix_words is m * n of the store the counters refer to, so
 * full_passes() = words_read / (m * n) exactly.
 */
struct PassStats {
  std::uint64_t words_read = 0;
  std::uint64_t words_written = 0;
  std::uint64_t block_reads = 0;
  std::uint64_t flop_estimate = 0;
  std::uint64_t matrix_words = 1;
  std::vector<StageRecord> stages;

  Rational full_passes() const { return Rational::make(words_read, matrix_words); }

  /// One JSON object per stage: {stage, words_read, words_written, seconds}.
  std::string to_json_lines() const;
};

/// Column partition of [0, n) into s ascending blocks of width n' (last possibly ragged).
struct BlockPlan {
  Index n = 0;
  Index n_prime = 0;
  std::vector<ColumnRange> blocks;
  /// Bytes the plan expects to keep resident; 0 when the plan came from an explicit s.
  std::uint64_t resident_bytes = 0;

  Index s() const { return static_cast<Index>(blocks.size()); }
};

inline constexpr std::uint64_t kUnlimitedBudget = std::numeric_limits<std::uint64_t>::max();

/**
 * Bytes of the resident working set besides the column block itself:
 *
 *   Y             m x l   sample matrix
 *   Q / B stage   m x l   orthonormal basis, staging for B blocks
 *   Omega_j       n' x l  Gaussian test block
 *   T_m           m x l   GEMM temporary (A_J W)
 *   T_n           n' x l  GEMM temporary (A_J^T T_m)
 */
std::uint64_t working_set_bytes(Index m, Index n_prime, Index l, std::size_t element_size);

/// Largest n' such that the block plus working set fits the budget; throws BudgetInfeasible.
BlockPlan plan_blocks(Index n, Index m, Index l, std::size_t element_size, std::uint64_t memory_budget_bytes);

/// Explicit partition count: n' = ceil(n / s). The block count is ceil(n / n'), which can be below s.
BlockPlan plan_blocks_fixed(Index n, Index s);

/**
 * Disk-backed column-major matrix (.oocm).
 *
 * Layout, all little-endian: "OOCM", u16 version (1), u16 element type
 * (1 = f64, 2 = f32), u64 rows, u64 cols, then the column-major payload.
 * Column block reads are one contiguous read each, and every read and write
 * is counted. Single writer or many concurrent readers; counters are atomic.
 */
class MatrixStore {
 public:
  static constexpr std::size_t kHeaderBytes = 24;
  static constexpr std::uint16_t kFormatVersion = 1;

  static MatrixStore create(const std::filesystem::path& path, Index rows, Index cols, ElementType type,
                            bool overwrite = false);
  static MatrixStore open(const std::filesystem::path& path, bool writable = false);

  MatrixStore(MatrixStore&&) noexcept;
  MatrixStore& operator=(MatrixStore&&) noexcept;
  ~MatrixStore();

  Index rows() const;
  Index cols() const;
  ElementType element_type() const;
  const std::filesystem::path& path() const;
  std::uint64_t file_bytes() const;

  template <RealScalar Scalar>
  Mat<Scalar> read_block(ColumnRange range) const;
  template <RealScalar Scalar>
  void write_block(ColumnRange range, const Eigen::Ref<const Mat<Scalar>>& block);
  template <RealScalar Scalar>
  Mat<Scalar> read_all() const {
    return read_block<Scalar>({0, cols()});
  }

  PassStats stats() const;
  void reset_stats();
  void add_flops(std::uint64_t flops) const;

  // Untyped payload access in host byte order; buffer holds range.size() * rows() elements.
  void read_raw(ColumnRange range, void* dst) const;
  void write_raw(ColumnRange range, const void* src);

 private:
  struct Impl;
  explicit MatrixStore(std::unique_ptr<Impl> impl);
  void check_range(ColumnRange range, const char* op) const;
  std::unique_ptr<Impl> impl_;
};

template <RealScalar Scalar>
Mat<Scalar> MatrixStore::read_block(ColumnRange range) const {
  check_range(range, "read_block");
  Mat<Scalar> out(rows(), range.size());
  if (element_type() == element_type_of<Scalar>()) {
    read_raw(range, out.data());
  } else if (element_type() == ElementType::f64) {
    Mat<double> tmp(rows(), range.size());
    read_raw(range, tmp.data());
    out = tmp.cast<Scalar>();
  } else {
    Mat<float> tmp(rows(), range.size());
    read_raw(range, tmp.data());
    out = tmp.cast<Scalar>();
  }
  return out;
}

template <RealScalar Scalar>
void MatrixStore::write_block(ColumnRange range, const Eigen::Ref<const Mat<Scalar>>& block) {
  check_range(range, "write_block");
  if (block.rows() != rows() || block.cols() != range.size()) {
    throw ShapeError("write_block: block is " + shape_string(block.rows(), block.cols()) + " but range needs " +
                     shape_string(rows(), range.size()));
  }
  if (element_type() == element_type_of<Scalar>()) {
    const Mat<Scalar> dense = block;
    write_raw(range, dense.data());
  } else if (element_type() == ElementType::f64) {
    const Mat<double> tmp = block.template cast<double>();
    write_raw(range, tmp.data());
  } else {
    const Mat<float> tmp = block.template cast<float>();
    write_raw(range, tmp.data());
  }
}

/**
 * Reads every block of the plan once, in order, handing each to fn(j, range, block).
 * With prefetch, block j+1 is read on a worker thread while fn consumes block j;
 * this doubles the resident block memory.
 */
template <RealScalar Scalar, typename Fn>
void for_each_block(const MatrixStore& store, const BlockPlan& plan, bool prefetch, Fn&& fn) {
  const Index s = plan.s();
  if (!prefetch) {
    for (Index j = 0; j < s; ++j) {
      const auto range = plan.blocks[static_cast<std::size_t>(j)];
      fn(j, range, store.read_block<Scalar>(range));
    }
    return;
  }
  auto load = [&store](ColumnRange r) { return store.read_block<Scalar>(r); };
  std::future<Mat<Scalar>> next;
  if (s > 0) next = std::async(std::launch::async, load, plan.blocks[0]);
  for (Index j = 0; j < s; ++j) {
    Mat<Scalar> block = next.get();
    if (j + 1 < s) next = std::async(std::launch::async, load, plan.blocks[static_cast<std::size_t>(j + 1)]);
    fn(j, plan.blocks[static_cast<std::size_t>(j)], std::move(block));
  }
}

/// Parses "268435456", "128MiB", "1GiB", "512M", "64K", "unlimited".
std::uint64_t parse_bytes(const std::string& text);
std::string format_bytes(std::uint64_t bytes);

}  // namespace brsvd
