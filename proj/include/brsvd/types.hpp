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

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <type_traits>

#include <Eigen/Dense>

namespace brsvd {

using Index = Eigen::Index;

/// Dense column-major matrix; the unit of all kernel computation.
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
concept RealScalar = std::is_same_v<Scalar, float> || std::is_same_v<Scalar, double>;

/// On-disk / in-memory element type tag.
enum class ElementType : std::uint16_t { f64 = 1, f32 = 2 };

constexpr std::size_t element_size(ElementType t) { return t == ElementType::f64 ? 8 : 4; }

template <RealScalar Scalar>
constexpr ElementType element_type_of() {
  return std::is_same_v<Scalar, double> ? ElementType::f64 : ElementType::f32;
}

inline std::string to_string(ElementType t) { return t == ElementType::f64 ? "f64" : "f32"; }

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the memory budget cannot hold one column plus the resident working set.
class BudgetInfeasible : public std::runtime_error {
 public:
  BudgetInfeasible(const std::string& what, std::size_t minimum_bytes)
      : std::runtime_error(what), minimum_bytes_(minimum_bytes) {}
  std::size_t minimum_bytes() const noexcept { return minimum_bytes_; }

 private:
  std::size_t minimum_bytes_;
};

inline std::string shape_string(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

/// Half-open column index range [begin, end).
struct ColumnRange {
  Index begin = 0;
  Index end = 0;
  Index size() const { return end - begin; }
  friend bool operator==(const ColumnRange&, const ColumnRange&) = default;
};

/**
 * Truncated SVD triple A ~ U diag(sigma) Vt.
 *
 * U is m x l, sigma has length l (non-increasing, non-negative), Vt is l x n.
 * target_rank is the k the caller asked for; the factors are returned at the
 * full sketch width l = k + p and truncated() gives the rank-k view.
 */
template <RealScalar Scalar>
struct SvdFactors {
  Mat<Scalar> U;
  Vec<Scalar> sigma;
  Mat<Scalar> Vt;
  Index target_rank = 0;

  Index effective_l() const { return sigma.size(); }

  SvdFactors truncated(Index k) const {
    if (k < 0 || k > sigma.size()) throw ShapeError("truncated: rank " + std::to_string(k) + " exceeds width " + std::to_string(sigma.size()));
    return SvdFactors{U.leftCols(k), sigma.head(k), Vt.topRows(k), k};
  }

  Mat<Scalar> reconstruct() const { return U * sigma.asDiagonal() * Vt; }
};

}  // namespace brsvd
