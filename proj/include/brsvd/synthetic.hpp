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

// Synthetic inputs: exact low-rank stores built as A_l * A_r from Gaussian
// factors, and a planted static-background video with a moving square.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "brsvd/ooc.hpp"

namespace brsvd {

struct SyntheticSpec {
  Index m = 0;
  Index n = 0;
  Index k = 0;
  ElementType element_type = ElementType::f64;
  std::uint64_t seed = 0;

  void validate() const;

  /**
   * Shape from a ratio m:n:k and a payload size: m*n*element_size ~ size_bytes
   * with m/n = rm/rn and k = n*rk/rn (at least 1). rank_override replaces k.
   */
  static SyntheticSpec from_ratio(Index rm, Index rn, Index rk, std::uint64_t size_bytes, ElementType type,
                                  std::uint64_t seed, Index rank_override = 0);
};

/// Parses "1024:32:1".
std::array<Index, 3> parse_ratio(const std::string& text);

/**
 * Writes A = A_l * A_r block by block: A_l (m x k) is stream 1 of the seed, and
 * the rows J of A_r^T are stream 2, so column block J is A_l * A_r(:, J) and A
 * is never held in memory. block_bytes bounds one generated block.
 */
MatrixStore gen_lowrank(const SyntheticSpec& spec, const std::filesystem::path& out_path, bool overwrite = false,
                        std::uint64_t block_bytes = std::uint64_t{64} << 20);

struct PlantedVideo {
  int width = 0;
  int height = 0;
  int frames = 0;
  int square = 0;
  Vec<double> background;                   // (w*h), quantized to 1/255
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask;  // (w*h) x f, true on the moving square
  Mat<double> matrix() const;               // background + square, as ingested
};

/**
 * Static textured background with a bright square moving diagonally; writes
 * frame_%05d.pgm files into dir and returns the ground truth.
 */
PlantedVideo write_planted_video(const std::filesystem::path& dir, int width, int height, int frames,
                                 std::uint64_t seed, int square = 8);

}  // namespace brsvd
