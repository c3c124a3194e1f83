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

// Grayscale frame sequences <-> matrix columns, for low-rank plus sparse
// video decomposition. Frames are binary PGM (P5), 8- or 16-bit.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "brsvd/ooc.hpp"

namespace brsvd {

struct PgmImage {
  int width = 0;
  int height = 0;
  int maxval = 255;
  std::vector<std::uint16_t> pixels;  // row-major, as stored in the file

  std::uint16_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

PgmImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const PgmImage& image);

/**
 * Frame t is column t of a (w*h) x f matrix. Within a frame, pixels are
 * flattened column-major: pixel (x, y) is row x*h + y. Values are pixel/maxval.
 */
struct FrameStack {
  int width = 0;
  int height = 0;
  int frame_count = 0;
  int maxval = 255;
  std::vector<std::string> filenames;
  /// Rescaled exports: value = offset + scale * pixel / maxval.
  double offset = 0.0;
  double scale = 1.0;

  Index rows() const { return static_cast<Index>(width) * height; }
  int bit_depth() const { return maxval > 255 ? 16 : 8; }

  std::string to_json() const;
  static FrameStack from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static FrameStack load(const std::filesystem::path& path);
};

/// Column of frame pixels in [0, 1].
Vec<double> frame_to_column(const PgmImage& image);

struct IngestResult {
  MatrixStore store;
  FrameStack stack;
};

/// Sidecar metadata path for a store: "<store>.json".
std::filesystem::path sidecar_path(const std::filesystem::path& store_path);

/**
 * Reads every file in dir whose name matches the glob pattern (sorted by name)
 * into a (w*h) x f store, and writes the sidecar JSON next to it.
 */
IngestResult ingest_frames(const std::filesystem::path& dir, const std::string& pattern,
                           const std::filesystem::path& store_path, ElementType type = ElementType::f64,
                           bool overwrite = false);

enum class ExportMode { clamp, rescale };

/**
 * One PGM per column into dir, named after stack.filenames when present.
 * clamp: values clipped to [0, 1]. rescale: [min, max] of the whole matrix mapped
 * to [0, maxval], with offset/scale recorded in dir/frames.json.
 */
FrameStack export_frames(const Mat<double>& matrix, const FrameStack& stack, const std::filesystem::path& dir,
                         ExportMode mode);
FrameStack export_frames(const MatrixStore& store, const FrameStack& stack, const std::filesystem::path& dir,
                         ExportMode mode);

}  // namespace brsvd
