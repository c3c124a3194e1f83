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

#include "brsvd/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "brsvd/frames.hpp"
#include "brsvd/random.hpp"

namespace brsvd {

void SyntheticSpec::validate() const {
  if (m < 1 || n < 1 || k < 1) {
    throw ConfigError("synthetic: m, n, k must be positive, got " + std::to_string(m) + ", " + std::to_string(n) +
                      ", " + std::to_string(k));
  }
  if (k > std::min(m, n)) {
    throw ConfigError("synthetic: rank " + std::to_string(k) + " exceeds min(m, n) = " + std::to_string(std::min(m, n)));
  }
}

SyntheticSpec SyntheticSpec::from_ratio(Index rm, Index rn, Index rk, std::uint64_t size_bytes, ElementType type,
                                        std::uint64_t seed, Index rank_override) {
  if (rm < 1 || rn < 1 || rk < 1) throw ConfigError("synthetic: ratio entries must be positive");
  const double elements = static_cast<double>(size_bytes) / static_cast<double>(element_size(type));
  SyntheticSpec spec;
  spec.element_type = type;
  spec.seed = seed;
  spec.n = std::max<Index>(1, static_cast<Index>(std::llround(std::sqrt(elements * rn / rm))));
  spec.m = std::max<Index>(1, static_cast<Index>(std::llround(static_cast<double>(spec.n) * rm / rn)));
  spec.k = rank_override > 0 ? rank_override : std::max<Index>(1, spec.n * rk / rn);
  spec.validate();
  return spec;
}

std::array<Index, 3> parse_ratio(const std::string& text) {
  std::array<Index, 3> out{};
  std::size_t start = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t stop = i < 2 ? text.find(':', start) : text.size();
    if (stop == std::string::npos) throw ConfigError("ratio '" + text + "' is not of the form m:n:k");
    try {
      out[static_cast<std::size_t>(i)] = std::stoll(text.substr(start, stop - start));
    } catch (const std::exception&) {
      throw ConfigError("ratio '" + text + "' is not of the form m:n:k");
    }
    if (out[static_cast<std::size_t>(i)] < 1) throw ConfigError("ratio entries must be positive in '" + text + "'");
    start = stop + 1;
  }
  return out;
}

MatrixStore gen_lowrank(const SyntheticSpec& spec, const std::filesystem::path& out_path, bool overwrite,
                        std::uint64_t block_bytes) {
  spec.validate();
  auto store = MatrixStore::create(out_path, spec.m, spec.n, spec.element_type, overwrite);
  const Mat<double> left = gaussian_matrix<double>(spec.m, spec.k, spec.seed, 1);
  const Index width = std::clamp<Index>(static_cast<Index>(block_bytes / (8 * static_cast<std::uint64_t>(spec.m))), 1, spec.n);
  for (Index begin = 0; begin < spec.n; begin += width) {
    const ColumnRange range{begin, std::min(spec.n, begin + width)};
    const Mat<double> right_t =
        gaussian_rows<double>(static_cast<std::uint64_t>(begin), range.size(), spec.k, spec.seed, 2);
    const Mat<double> block = left * right_t.transpose();
    store.write_block<double>(range, block);
  }
  return store;
}

Mat<double> PlantedVideo::matrix() const {
  Mat<double> out = background.replicate(1, frames);
  for (Index t = 0; t < frames; ++t) {
    for (Index r = 0; r < out.rows(); ++r) {
      if (mask(r, t)) out(r, t) = 1.0;
    }
  }
  return out;
}

PlantedVideo write_planted_video(const std::filesystem::path& dir, int width, int height, int frames,
                                 std::uint64_t seed, int square) {
  if (width < square || height < square || frames < 1 || square < 1) {
    throw ConfigError("planted video: frame must hold the square and have at least one frame");
  }
  std::filesystem::create_directories(dir);
  PlantedVideo v;
  v.width = width;
  v.height = height;
  v.frames = frames;
  v.square = square;
  const Index rows = static_cast<Index>(width) * height;

  // Smooth gradient plus mild texture, kept in [0.15, 0.75] so the white square stands out.
  const Mat<double> noise = gaussian_matrix<double>(rows, 1, seed, 3);
  v.background.resize(rows);
  for (int x = 0; x < width; ++x) {
    for (int y = 0; y < height; ++y) {
      const Index r = static_cast<Index>(x) * height + y;
      const double smooth = 0.25 + 0.3 * (static_cast<double>(x) / width) + 0.1 * (static_cast<double>(y) / height);
      const double value = std::clamp(smooth + 0.03 * noise(r, 0), 0.15, 0.75);
      v.background(r) = std::round(value * 255.0) / 255.0;
    }
  }

  v.mask.setConstant(rows, frames, false);
  const int span_x = width - square;
  const int span_y = height - square;
  for (int t = 0; t < frames; ++t) {
    const double phase = frames > 1 ? static_cast<double>(t) / (frames - 1) : 0.0;
    const int x0 = static_cast<int>(std::lround(phase * span_x));
    const int y0 = static_cast<int>(std::lround(phase * span_y));
    for (int x = x0; x < x0 + square; ++x) {
      for (int y = y0; y < y0 + square; ++y) v.mask(static_cast<Index>(x) * height + y, t) = true;
    }
  }

  const Mat<double> m = v.matrix();
  PgmImage img;
  img.width = width;
  img.height = height;
  img.maxval = 255;
  img.pixels.resize(static_cast<std::size_t>(rows));
  for (int t = 0; t < frames; ++t) {
    for (int x = 0; x < width; ++x) {
      for (int y = 0; y < height; ++y) {
        img.pixels[static_cast<std::size_t>(y) * width + x] =
            static_cast<std::uint16_t>(std::lround(m(static_cast<Index>(x) * height + y, t) * 255.0));
      }
    }
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05d.pgm", t);
    write_pgm(dir / name, img);
  }
  return v;
}

}  // namespace brsvd
