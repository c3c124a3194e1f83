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

#include "brsvd/ooc.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cstring>

#include <json.hpp>

namespace brsvd {

namespace {

std::string errno_text() { return std::strerror(errno); }

template <typename T>
void put_le(unsigned char* dst, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) dst[i] = static_cast<unsigned char>(value >> (8 * i));
}

template <typename T>
T get_le(const unsigned char* src) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(src[i]) << (8 * i);
  return value;
}

// Payload is little-endian on disk.
void swap_if_big_endian(void* data, std::size_t count, std::size_t width) {
  if constexpr (std::endian::native == std::endian::little) {
    (void)data, (void)count, (void)width;
  } else {
    auto* bytes = static_cast<unsigned char*>(data);
    for (std::size_t i = 0; i < count; ++i) std::reverse(bytes + i * width, bytes + (i + 1) * width);
  }
}

void pread_all(int fd, void* dst, std::size_t bytes, std::uint64_t offset, const std::string& path) {
  auto* out = static_cast<char*>(dst);
  while (bytes > 0) {
    const ssize_t got = ::pread(fd, out, bytes, static_cast<off_t>(offset));
    if (got < 0) {
      if (errno == EINTR) continue;
      throw IoError("read failed on " + path + ": " + errno_text());
    }
    if (got == 0) throw IoError("unexpected end of file in " + path);
    out += got;
    bytes -= static_cast<std::size_t>(got);
    offset += static_cast<std::uint64_t>(got);
  }
}

void pwrite_all(int fd, const void* src, std::size_t bytes, std::uint64_t offset, const std::string& path) {
  const auto* in = static_cast<const char*>(src);
  while (bytes > 0) {
    const ssize_t put = ::pwrite(fd, in, bytes, static_cast<off_t>(offset));
    if (put < 0) {
      if (errno == EINTR) continue;
      throw IoError("write failed on " + path + ": " + errno_text());
    }
    in += put;
    bytes -= static_cast<std::size_t>(put);
    offset += static_cast<std::uint64_t>(put);
  }
}

}  // namespace

std::string PassStats::to_json_lines() const {
  std::string out;
  for (const auto& st : stages) {
    nlohmann::json line{{"stage", st.stage},
                        {"words_read", st.words_read},
                        {"words_written", st.words_written},
                        {"seconds", st.seconds}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Block planning

std::uint64_t working_set_bytes(Index m, Index n_prime, Index l, std::size_t element_size) {
  const auto mm = static_cast<std::uint64_t>(m);
  const auto np = static_cast<std::uint64_t>(n_prime);
  const auto ll = static_cast<std::uint64_t>(l);
  return element_size * (3 * mm * ll + 2 * np * ll);
}

namespace {

std::vector<ColumnRange> make_blocks(Index n, Index n_prime) {
  std::vector<ColumnRange> blocks;
  for (Index begin = 0; begin < n; begin += n_prime) blocks.push_back({begin, std::min(n, begin + n_prime)});
  return blocks;
}

}  // namespace

BlockPlan plan_blocks(Index n, Index m, Index l, std::size_t element_size, std::uint64_t memory_budget_bytes) {
  if (n < 1 || m < 1 || l < 1 || element_size == 0) {
    throw ConfigError("plan_blocks: dimensions must be positive, got m=" + std::to_string(m) +
                      " n=" + std::to_string(n) + " l=" + std::to_string(l));
  }
  const auto mm = static_cast<unsigned __int128>(m);
  const auto ll = static_cast<unsigned __int128>(l);
  const unsigned __int128 budget_words = memory_budget_bytes / element_size;
  // es * (m n' + 3 m l + 2 n' l) <= budget
  const unsigned __int128 fixed = 3 * mm * ll;
  const unsigned __int128 per_column = mm + 2 * ll;
  if (budget_words < fixed + per_column) {
    const auto minimum = static_cast<std::uint64_t>((fixed + per_column) * element_size);
    throw BudgetInfeasible("memory budget " + format_bytes(memory_budget_bytes) +
                               " is infeasible: one column plus the working set needs " + format_bytes(minimum) +
                               " (" + std::to_string(minimum) + " bytes)",
                           minimum);
  }
  const unsigned __int128 fit = (budget_words - fixed) / per_column;
  const Index n_prime = fit >= static_cast<unsigned __int128>(n) ? n : static_cast<Index>(fit);

  BlockPlan plan;
  plan.n = n;
  plan.n_prime = n_prime;
  plan.blocks = make_blocks(n, n_prime);
  plan.resident_bytes = element_size * static_cast<std::uint64_t>(m) * static_cast<std::uint64_t>(n_prime) +
                        working_set_bytes(m, n_prime, l, element_size);
  return plan;
}

BlockPlan plan_blocks_fixed(Index n, Index s) {
  if (n < 1 || s < 1) {
    throw ConfigError("plan_blocks: need n >= 1 and s >= 1, got n=" + std::to_string(n) + " s=" + std::to_string(s));
  }
  if (s > n) throw ConfigError("plan_blocks: s=" + std::to_string(s) + " exceeds n=" + std::to_string(n));
  BlockPlan plan;
  plan.n = n;
  plan.n_prime = (n + s - 1) / s;
  plan.blocks = make_blocks(n, plan.n_prime);
  return plan;
}

// ---------------------------------------------------------------------------
// MatrixStore

struct MatrixStore::Impl {
  std::filesystem::path path;
  int fd = -1;
  bool writable = false;
  Index rows = 0;
  Index cols = 0;
  ElementType type = ElementType::f64;
  mutable std::atomic<std::uint64_t> words_read{0};
  mutable std::atomic<std::uint64_t> block_reads{0};
  mutable std::atomic<std::uint64_t> flops{0};
  std::atomic<std::uint64_t> words_written{0};

  ~Impl() {
    if (fd >= 0) ::close(fd);
  }

  std::uint64_t offset_of(Index column) const {
    return kHeaderBytes + static_cast<std::uint64_t>(column) * static_cast<std::uint64_t>(rows) * element_size(type);
  }
};

MatrixStore::MatrixStore(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
MatrixStore::MatrixStore(MatrixStore&&) noexcept = default;
MatrixStore& MatrixStore::operator=(MatrixStore&&) noexcept = default;
MatrixStore::~MatrixStore() = default;

MatrixStore MatrixStore::create(const std::filesystem::path& path, Index rows, Index cols, ElementType type,
                                bool overwrite) {
  if (rows < 1 || cols < 1) {
    throw ShapeError("store_create: dimensions must be positive, got " + shape_string(rows, cols));
  }
  if (type != ElementType::f64 && type != ElementType::f32) throw ConfigError("store_create: unknown element type");
  if (!overwrite && std::filesystem::exists(path)) {
    throw IoError("store_create: " + path.string() + " exists (pass overwrite to replace it)");
  }
  auto impl = std::make_unique<Impl>();
  impl->path = path;
  impl->rows = rows;
  impl->cols = cols;
  impl->type = type;
  impl->writable = true;
  impl->fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_TRUNC, 0644);
  if (impl->fd < 0) throw IoError("store_create: cannot open " + path.string() + ": " + errno_text());

  unsigned char header[kHeaderBytes];
  std::memcpy(header, "OOCM", 4);
  put_le<std::uint16_t>(header + 4, kFormatVersion);
  put_le<std::uint16_t>(header + 6, static_cast<std::uint16_t>(type));
  put_le<std::uint64_t>(header + 8, static_cast<std::uint64_t>(rows));
  put_le<std::uint64_t>(header + 16, static_cast<std::uint64_t>(cols));
  pwrite_all(impl->fd, header, kHeaderBytes, 0, path.string());
  const std::uint64_t total = impl->offset_of(cols);
  if (::ftruncate(impl->fd, static_cast<off_t>(total)) != 0) {
    throw IoError("store_create: cannot size " + path.string() + ": " + errno_text());
  }
  return MatrixStore(std::move(impl));
}

MatrixStore MatrixStore::open(const std::filesystem::path& path, bool writable) {
  auto impl = std::make_unique<Impl>();
  impl->path = path;
  impl->writable = writable;
  impl->fd = ::open(path.c_str(), writable ? O_RDWR : O_RDONLY);
  if (impl->fd < 0) throw IoError("store_open: cannot open " + path.string() + ": " + errno_text());

  unsigned char header[kHeaderBytes];
  struct stat st {};
  if (::fstat(impl->fd, &st) != 0) throw IoError("store_open: cannot stat " + path.string());
  if (static_cast<std::uint64_t>(st.st_size) < kHeaderBytes) throw IoError("store_open: " + path.string() + " is too short");
  pread_all(impl->fd, header, kHeaderBytes, 0, path.string());
  if (std::memcmp(header, "OOCM", 4) != 0) throw IoError("store_open: bad magic in " + path.string());
  const auto version = get_le<std::uint16_t>(header + 4);
  if (version != kFormatVersion) throw IoError("store_open: unsupported format version " + std::to_string(version));
  const auto code = get_le<std::uint16_t>(header + 6);
  if (code != 1 && code != 2) throw IoError("store_open: unknown element type code " + std::to_string(code));
  impl->type = static_cast<ElementType>(code);
  const auto rows = get_le<std::uint64_t>(header + 8);
  const auto cols = get_le<std::uint64_t>(header + 16);
  if (rows == 0 || cols == 0) throw IoError("store_open: zero dimension in " + path.string());
  impl->rows = static_cast<Index>(rows);
  impl->cols = static_cast<Index>(cols);
  if (static_cast<std::uint64_t>(st.st_size) != impl->offset_of(impl->cols)) {
    throw IoError("store_open: " + path.string() + " has " + std::to_string(st.st_size) + " bytes, header implies " +
                  std::to_string(impl->offset_of(impl->cols)));
  }
  return MatrixStore(std::move(impl));
}

Index MatrixStore::rows() const { return impl_->rows; }
Index MatrixStore::cols() const { return impl_->cols; }
ElementType MatrixStore::element_type() const { return impl_->type; }
const std::filesystem::path& MatrixStore::path() const { return impl_->path; }
std::uint64_t MatrixStore::file_bytes() const { return impl_->offset_of(impl_->cols); }

void MatrixStore::check_range(ColumnRange range, const char* op) const {
  if (range.begin < 0 || range.end > impl_->cols || range.begin >= range.end) {
    throw ShapeError(std::string(op) + ": column range [" + std::to_string(range.begin) + ", " +
                     std::to_string(range.end) + ") is outside [0, " + std::to_string(impl_->cols) + ")");
  }
}

void MatrixStore::read_raw(ColumnRange range, void* dst) const {
  check_range(range, "read_block");
  const std::size_t width = element_size(impl_->type);
  const auto count = static_cast<std::size_t>(range.size()) * static_cast<std::size_t>(impl_->rows);
  pread_all(impl_->fd, dst, count * width, impl_->offset_of(range.begin), impl_->path.string());
  swap_if_big_endian(dst, count, width);
  impl_->words_read += count;
  impl_->block_reads += 1;
}

void MatrixStore::write_raw(ColumnRange range, const void* src) {
  check_range(range, "write_block");
  if (!impl_->writable) throw IoError("write_block: " + impl_->path.string() + " was opened read-only");
  const std::size_t width = element_size(impl_->type);
  const auto count = static_cast<std::size_t>(range.size()) * static_cast<std::size_t>(impl_->rows);
  if constexpr (std::endian::native == std::endian::little) {
    pwrite_all(impl_->fd, src, count * width, impl_->offset_of(range.begin), impl_->path.string());
  } else {
    std::vector<unsigned char> tmp(static_cast<const unsigned char*>(src),
                                   static_cast<const unsigned char*>(src) + count * width);
    swap_if_big_endian(tmp.data(), count, width);
    pwrite_all(impl_->fd, tmp.data(), tmp.size(), impl_->offset_of(range.begin), impl_->path.string());
  }
  impl_->words_written += count;
}

PassStats MatrixStore::stats() const {
  PassStats s;
  s.words_read = impl_->words_read.load();
  s.words_written = impl_->words_written.load();
  s.block_reads = impl_->block_reads.load();
  s.flop_estimate = impl_->flops.load();
  s.matrix_words = static_cast<std::uint64_t>(impl_->rows) * static_cast<std::uint64_t>(impl_->cols);
  return s;
}

void MatrixStore::reset_stats() {
  impl_->words_read = 0;
  impl_->words_written = 0;
  impl_->block_reads = 0;
  impl_->flops = 0;
}

void MatrixStore::add_flops(std::uint64_t flops) const { impl_->flops += flops; }

}  // namespace brsvd
