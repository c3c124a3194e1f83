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

#include "brsvd/frames.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

namespace brsvd {

namespace fs = std::filesystem;

namespace {

// Next header token, skipping whitespace and '#' comments.
std::string next_token(const std::string& buf, std::size_t& pos) {
  while (pos < buf.size()) {
    const char c = buf[pos];
    if (c == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
  return buf.substr(start, pos - start);
}

int parse_positive(const std::string& token, const fs::path& path, const char* what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(token, &used);
    if (used == token.size() && v > 0) return v;
  } catch (const std::exception&) {
  }
  throw IoError("read_pgm: bad " + std::string(what) + " '" + token + "' in " + path.string());
}

}  // namespace

PgmImage read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_pgm: cannot open " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  if (next_token(buf, pos) != "P5") throw IoError("read_pgm: " + path.string() + " is not a binary PGM (P5)");
  PgmImage img;
  img.width = parse_positive(next_token(buf, pos), path, "width");
  img.height = parse_positive(next_token(buf, pos), path, "height");
  img.maxval = parse_positive(next_token(buf, pos), path, "maxval");
  if (img.maxval > 65535) throw IoError("read_pgm: maxval above 65535 in " + path.string());
  ++pos;  // single whitespace byte before the raster
  const std::size_t count = static_cast<std::size_t>(img.width) * img.height;
  const std::size_t width = img.maxval > 255 ? 2 : 1;
  if (buf.size() < pos + count * width) throw IoError("read_pgm: truncated raster in " + path.string());
  img.pixels.resize(count);
  const auto* raw = reinterpret_cast<const unsigned char*>(buf.data() + pos);
  for (std::size_t i = 0; i < count; ++i) {
    img.pixels[i] = width == 2 ? static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]) : raw[i];
  }
  return img;
}

void write_pgm(const fs::path& path, const PgmImage& img) {
  if (img.width < 1 || img.height < 1 || img.pixels.size() != static_cast<std::size_t>(img.width) * img.height) {
    throw ShapeError("write_pgm: pixel count does not match " + std::to_string(img.width) + "x" +
                     std::to_string(img.height));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("write_pgm: cannot open " + path.string());
  out << "P5\n" << img.width << ' ' << img.height << '\n' << img.maxval << '\n';
  std::string raster;
  raster.reserve(img.pixels.size() * (img.maxval > 255 ? 2 : 1));
  for (const auto p : img.pixels) {
    if (img.maxval > 255) raster.push_back(static_cast<char>(p >> 8));
    raster.push_back(static_cast<char>(p & 0xff));
  }
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) throw IoError("write_pgm: write failed on " + path.string());
}

std::string FrameStack::to_json() const {
  nlohmann::json j{{"width", width},   {"height", height},   {"frames", frame_count},
                   {"maxval", maxval}, {"bit_depth", bit_depth()}, {"filenames", filenames},
                   {"offset", offset}, {"scale", scale},     {"layout", "column-major within frame"}};
  return j.dump(2);
}

FrameStack FrameStack::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  FrameStack s;
  s.width = j.at("width").get<int>();
  s.height = j.at("height").get<int>();
  s.frame_count = j.at("frames").get<int>();
  s.maxval = j.value("maxval", 255);
  s.filenames = j.value("filenames", std::vector<std::string>{});
  s.offset = j.value("offset", 0.0);
  s.scale = j.value("scale", 1.0);
  return s;
}

void FrameStack::save(const fs::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write frame metadata " + path.string());
  out << to_json() << '\n';
}

FrameStack FrameStack::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read frame metadata " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

Vec<double> frame_to_column(const PgmImage& img) {
  Vec<double> col(static_cast<Index>(img.width) * img.height);
  const double maxval = img.maxval;
  for (int x = 0; x < img.width; ++x) {
    for (int y = 0; y < img.height; ++y) col(static_cast<Index>(x) * img.height + y) = img.at(x, y) / maxval;
  }
  return col;
}

fs::path sidecar_path(const fs::path& store_path) { return fs::path(store_path.string() + ".json"); }

IngestResult ingest_frames(const fs::path& dir, const std::string& pattern, const fs::path& store_path,
                           ElementType type, bool overwrite) {
  if (!fs::is_directory(dir)) throw IoError("ingest_frames: " + dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (::fnmatch(pattern.c_str(), name.c_str(), 0) == 0) files.push_back(entry.path());
  }
  if (files.empty()) throw IoError("ingest_frames: no files matching '" + pattern + "' in " + dir.string());
  std::sort(files.begin(), files.end());

  const PgmImage first = read_pgm(files.front());
  FrameStack stack;
  stack.width = first.width;
  stack.height = first.height;
  stack.maxval = first.maxval;
  stack.frame_count = static_cast<int>(files.size());

  auto store = MatrixStore::create(store_path, stack.rows(), stack.frame_count, type, overwrite);
  for (std::size_t t = 0; t < files.size(); ++t) {
    const PgmImage img = t == 0 ? first : read_pgm(files[t]);
    if (img.width != stack.width || img.height != stack.height) {
      throw ShapeError("ingest_frames: " + files[t].filename().string() + " is " + std::to_string(img.width) + "x" +
                       std::to_string(img.height) + ", expected " + std::to_string(stack.width) + "x" +
                       std::to_string(stack.height));
    }
    if (img.maxval != stack.maxval) {
      throw ShapeError("ingest_frames: " + files[t].filename().string() + " has maxval " + std::to_string(img.maxval) +
                       ", expected " + std::to_string(stack.maxval));
    }
    const auto col = static_cast<Index>(t);
    store.write_block<double>({col, col + 1}, frame_to_column(img));
    stack.filenames.push_back(files[t].filename().string());
  }
  stack.save(sidecar_path(store_path));
  return {std::move(store), std::move(stack)};
}

FrameStack export_frames(const Mat<double>& matrix, const FrameStack& stack, const fs::path& dir, ExportMode mode) {
  if (matrix.rows() != stack.rows()) {
    throw ShapeError("export_frames: matrix has " + std::to_string(matrix.rows()) + " rows but frames need " +
                     std::to_string(stack.rows()));
  }
  fs::create_directories(dir);
  FrameStack out = stack;
  out.frame_count = static_cast<int>(matrix.cols());
  out.offset = 0.0;
  out.scale = 1.0;
  if (mode == ExportMode::rescale && matrix.size() > 0) {
    const double lo = matrix.minCoeff();
    const double hi = matrix.maxCoeff();
    out.offset = lo;
    out.scale = hi > lo ? hi - lo : 0.0;
  }
  if (out.filenames.size() != static_cast<std::size_t>(out.frame_count)) {
    out.filenames.clear();
    for (int t = 0; t < out.frame_count; ++t) {
      char name[32];
      std::snprintf(name, sizeof name, "frame_%05d.pgm", t);
      out.filenames.emplace_back(name);
    }
  }

  PgmImage img;
  img.width = out.width;
  img.height = out.height;
  img.maxval = out.maxval;
  img.pixels.resize(static_cast<std::size_t>(out.width) * out.height);
  for (int t = 0; t < out.frame_count; ++t) {
    for (int x = 0; x < out.width; ++x) {
      for (int y = 0; y < out.height; ++y) {
        double v = matrix(static_cast<Index>(x) * out.height + y, t);
        if (mode == ExportMode::rescale) v = out.scale > 0.0 ? (v - out.offset) / out.scale : 0.0;
        v = std::clamp(v, 0.0, 1.0);
        img.pixels[static_cast<std::size_t>(y) * out.width + x] = static_cast<std::uint16_t>(std::lround(v * out.maxval));
      }
    }
    write_pgm(dir / out.filenames[static_cast<std::size_t>(t)], img);
  }
  out.save(dir / "frames.json");
  return out;
}

FrameStack export_frames(const MatrixStore& store, const FrameStack& stack, const fs::path& dir, ExportMode mode) {
  return export_frames(store.read_all<double>(), stack, dir, mode);
}

}  // namespace brsvd
