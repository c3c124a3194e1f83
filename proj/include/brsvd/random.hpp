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

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "brsvd/types.hpp"

namespace brsvd {

/**
 * Philox4x32-10 counter-based generator (Salmon et al., "Parallel random
 * numbers: as easy as 1, 2, 3"). Output is a pure function of (counter, key),
 * so any entry of a random matrix can be produced without generating the
 * entries before it.
 */
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) {
    ctr = round(ctr, key);
    for (int r = 1; r < 10; ++r) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
      ctr = round(ctr, key);
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

namespace detail {

// 53 random bits mapped to the open interval (0, 1).
inline double open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

// Box-Muller: one Philox block -> two independent N(0,1) samples.
inline std::array<double, 2> normal_pair(std::uint64_t row, std::uint32_t col_pair, std::uint64_t seed,
                                         std::uint32_t stream) {
  const Philox4x32::Counter ctr{static_cast<std::uint32_t>(row), static_cast<std::uint32_t>(row >> 32), col_pair,
                                stream};
  const Philox4x32::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  const auto out = Philox4x32::generate(ctr, key);
  const double u1 = open_unit(out[0], out[1]);
  const double u2 = open_unit(out[2], out[3]);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

}  // namespace detail

/**
 * Rows [row_offset, row_offset + rows) of the conceptually infinite Gaussian
 * matrix identified by (master_seed, stream_index).
 *
 * Entry (i, j) depends only on the global row i, the column j, the seed and
 * the stream, so slicing a matrix into row blocks and generating each block
 * separately yields exactly the rows of the one-shot matrix. Columns 2c and
 * 2c+1 of a row share one Philox call.
 */
template <RealScalar Scalar = double>
Mat<Scalar> gaussian_rows(std::uint64_t row_offset, Index rows, Index cols, std::uint64_t master_seed,
                          std::uint32_t stream_index) {
  if (rows < 1 || cols < 1) throw ShapeError("gaussian_matrix: empty shape " + shape_string(rows, cols));
  Mat<Scalar> out(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const std::uint64_t global_row = row_offset + static_cast<std::uint64_t>(i);
    for (Index j = 0; j < cols; j += 2) {
      const auto z = detail::normal_pair(global_row, static_cast<std::uint32_t>(j / 2), master_seed, stream_index);
      out(i, j) = static_cast<Scalar>(z[0]);
      if (j + 1 < cols) out(i, j + 1) = static_cast<Scalar>(z[1]);
    }
  }
  return out;
}

/// Seeded standard Gaussian matrix with i.i.d. N(0, 1) entries.
template <RealScalar Scalar = double>
Mat<Scalar> gaussian_matrix(Index rows, Index cols, std::uint64_t master_seed, std::uint32_t stream_index) {
  return gaussian_rows<Scalar>(0, rows, cols, master_seed, stream_index);
}

}  // namespace brsvd
