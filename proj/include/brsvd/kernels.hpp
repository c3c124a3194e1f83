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

// Dense primitives every decomposition path is built on: GEMM, tall-skinny
// QR, the small SVD of the core matrix, and seeded Gaussian generation.

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "brsvd/random.hpp"
#include "brsvd/types.hpp"

namespace brsvd {

template <RealScalar Scalar>
using ConstRef = Eigen::Ref<const Mat<Scalar>>;

/// Orthogonality constant c in ||Q^T Q - I||_F <= c * l * eps.
inline constexpr double kOrthoConstant = 10.0;

template <RealScalar Scalar>
constexpr double machine_epsilon() {
  return static_cast<double>(std::numeric_limits<Scalar>::epsilon());
}

/**
 * alpha * op(a) * op(b) + beta * c, where op optionally transposes.
 *
 * When beta is zero, c is not read and may be empty (BLAS semantics).
 */
template <RealScalar Scalar>
Mat<Scalar> gemm(Scalar alpha, const ConstRef<Scalar>& a, bool transpose_a, const ConstRef<Scalar>& b,
                 bool transpose_b, Scalar beta, const ConstRef<Scalar>& c) {
  const Index a_rows = transpose_a ? a.cols() : a.rows();
  const Index a_cols = transpose_a ? a.rows() : a.cols();
  const Index b_rows = transpose_b ? b.cols() : b.rows();
  const Index b_cols = transpose_b ? b.rows() : b.cols();
  if (a_cols != b_rows) {
    throw ShapeError("gemm: inner dimensions disagree, op(a) is " + shape_string(a_rows, a_cols) + " and op(b) is " +
                     shape_string(b_rows, b_cols));
  }
  Mat<Scalar> out;
  if (beta == Scalar(0)) {
    out = Mat<Scalar>::Zero(a_rows, b_cols);
  } else {
    if (c.rows() != a_rows || c.cols() != b_cols) {
      throw ShapeError("gemm: c is " + shape_string(c.rows(), c.cols()) + " but op(a)*op(b) is " +
                       shape_string(a_rows, b_cols));
    }
    out = beta * c;
  }
  if (alpha == Scalar(0)) return out;
  if (!transpose_a && !transpose_b) out.noalias() += alpha * a * b;
  else if (transpose_a && !transpose_b) out.noalias() += alpha * a.transpose() * b;
  else if (!transpose_a && transpose_b) out.noalias() += alpha * a * b.transpose();
  else out.noalias() += alpha * a.transpose() * b.transpose();
  return out;
}

/// op(a) * op(b).
template <RealScalar Scalar>
Mat<Scalar> gemm(const ConstRef<Scalar>& a, bool transpose_a, const ConstRef<Scalar>& b, bool transpose_b) {
  return gemm<Scalar>(Scalar(1), a, transpose_a, b, transpose_b, Scalar(0), Mat<Scalar>());
}

// ---------------------------------------------------------------------------
// Tall-skinny QR

struct TsqrOptions {
  /// Leaf row-block height; 0 selects 64 * l. Clamped to at least 2 * l.
  Index block_rows = 0;
};

template <RealScalar Scalar>
struct TsqrResult {
  Mat<Scalar> Q;  // m x l, orthonormal columns
  Mat<Scalar> R;  // l x l upper triangular, non-negative diagonal
  Index numerical_rank = 0;
  bool rank_warning = false;
  Index levels = 0;
  /// Number of times each leaf row block of the input was read while factoring.
  std::vector<int> leaf_reads;
};

namespace detail {

template <RealScalar Scalar>
struct TsqrNode {
  Mat<Scalar> q;  // explicit thin Q of this node's stacked input
  Mat<Scalar> r;
  bool passthrough = false;
};

template <RealScalar Scalar>
void householder_thin(const Mat<Scalar>& x, Mat<Scalar>& q, Mat<Scalar>& r) {
  const Index l = x.cols();
  Eigen::HouseholderQR<Mat<Scalar>> qr(x);
  r = qr.matrixQR().topRows(l).template triangularView<Eigen::Upper>();
  q = Mat<Scalar>::Identity(x.rows(), l);
  qr.householderQ().applyThisOnTheLeft(q);
}

}  // namespace detail

/**
 * Communication-avoiding QR of a tall-skinny matrix.
 *
 * Rows are split into leaf blocks, each leaf is Householder-factored once,
 * and the l x l R factors are merged pairwise up a binary tree. Q is then
 * assembled top-down, so each leaf block of y is read exactly once.
 */
template <RealScalar Scalar>
TsqrResult<Scalar> tsqr(const ConstRef<Scalar>& y, const TsqrOptions& options = {}) {
  const Index m = y.rows();
  const Index l = y.cols();
  if (l < 1 || m < l) throw ShapeError("tsqr: need rows >= cols >= 1, got " + shape_string(m, l));

  Index height = options.block_rows > 0 ? options.block_rows : 64 * l;
  height = std::max(height, 2 * l);
  const Index leaf_count = std::max<Index>(1, m / height);
  const Index base_rows = m / leaf_count;

  TsqrResult<Scalar> result;
  result.leaf_reads.assign(static_cast<std::size_t>(leaf_count), 0);

  std::vector<Index> leaf_begin(static_cast<std::size_t>(leaf_count));
  std::vector<std::vector<detail::TsqrNode<Scalar>>> levels(1);
  levels[0].resize(static_cast<std::size_t>(leaf_count));
  for (Index b = 0; b < leaf_count; ++b) {
    const Index begin = b * base_rows;
    const Index rows = (b + 1 == leaf_count) ? m - begin : base_rows;
    leaf_begin[static_cast<std::size_t>(b)] = begin;
    Mat<Scalar> block = y.middleRows(begin, rows);
    ++result.leaf_reads[static_cast<std::size_t>(b)];
    auto& node = levels[0][static_cast<std::size_t>(b)];
    detail::householder_thin(block, node.q, node.r);
  }

  while (levels.back().size() > 1) {
    const auto& below = levels.back();
    std::vector<detail::TsqrNode<Scalar>> above((below.size() + 1) / 2);
    for (std::size_t i = 0; i < above.size(); ++i) {
      if (2 * i + 1 == below.size()) {
        above[i].r = below[2 * i].r;
        above[i].passthrough = true;
        continue;
      }
      Mat<Scalar> stacked(2 * l, l);
      stacked << below[2 * i].r, below[2 * i + 1].r;
      detail::householder_thin(stacked, above[i].q, above[i].r);
    }
    levels.push_back(std::move(above));
  }
  result.levels = static_cast<Index>(levels.size());

  // Top-down: each node's l x l coefficient maps its thin Q into the final basis.
  std::vector<Mat<Scalar>> coeff{Mat<Scalar>::Identity(l, l)};
  for (std::size_t lv = levels.size() - 1; lv > 0; --lv) {
    const auto& nodes = levels[lv];
    std::vector<Mat<Scalar>> next(levels[lv - 1].size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].passthrough) {
        next[2 * i] = coeff[i];
        continue;
      }
      const Mat<Scalar> qc = nodes[i].q * coeff[i];
      next[2 * i] = qc.topRows(l);
      next[2 * i + 1] = qc.bottomRows(l);
    }
    coeff = std::move(next);
  }

  result.Q.resize(m, l);
  for (Index b = 0; b < leaf_count; ++b) {
    const auto& leaf = levels[0][static_cast<std::size_t>(b)];
    result.Q.middleRows(leaf_begin[static_cast<std::size_t>(b)], leaf.q.rows()).noalias() =
        leaf.q * coeff[static_cast<std::size_t>(b)];
  }
  result.R = levels.back()[0].r;

  for (Index j = 0; j < l; ++j) {
    if (result.R(j, j) < Scalar(0)) {
      result.R.row(j) *= Scalar(-1);
      result.Q.col(j) *= Scalar(-1);
    }
  }

  const double threshold = static_cast<double>(l) * machine_epsilon<Scalar>() * static_cast<double>(y.norm());
  result.numerical_rank = 0;
  for (Index j = 0; j < l; ++j) {
    if (static_cast<double>(std::abs(result.R(j, j))) > threshold) ++result.numerical_rank;
  }
  result.rank_warning = result.numerical_rank < l;
  return result;
}

// ---------------------------------------------------------------------------
// Small SVD of the short-fat core matrix

/// Stable descending sort of singular triplets; columns of U and rows of Vt follow.
template <RealScalar Scalar>
void sort_descending(Mat<Scalar>& U, Vec<Scalar>& sigma, Mat<Scalar>& Vt) {
  std::vector<Index> order(static_cast<std::size_t>(sigma.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return sigma(a) > sigma(b); });
  if (std::is_sorted(order.begin(), order.end())) return;
  Mat<Scalar> U2(U.rows(), U.cols());
  Vec<Scalar> s2(sigma.size());
  Mat<Scalar> V2(Vt.rows(), Vt.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto src = order[i];
    const auto dst = static_cast<Index>(i);
    U2.col(dst) = U.col(src);
    s2(dst) = sigma(src);
    V2.row(dst) = Vt.row(src);
  }
  U = std::move(U2);
  sigma = std::move(s2);
  Vt = std::move(V2);
}

/**
 * SVD of b (l x n, l <= n): b^T = Q_b R by tsqr, then a dense Jacobi SVD of
 * the l x l factor R^T = U_r S V_r^T, so b = U_r S (Q_b V_r)^T.
 */
template <RealScalar Scalar>
SvdFactors<Scalar> small_svd(const ConstRef<Scalar>& b) {
  const Index l = b.rows();
  const Index n = b.cols();
  if (l < 1 || l > n) throw ShapeError("small_svd: need 1 <= rows <= cols, got " + shape_string(l, n));

  const Mat<Scalar> bt = b.transpose();
  const auto qr = tsqr<Scalar>(bt);
  Eigen::JacobiSVD<Mat<Scalar>> svd(qr.R.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);

  SvdFactors<Scalar> out;
  out.U = svd.matrixU();
  out.sigma = svd.singularValues().cwiseMax(Scalar(0));
  out.Vt = gemm<Scalar>(svd.matrixV(), true, qr.Q, true);
  out.target_rank = l;
  sort_descending(out.U, out.sigma, out.Vt);
  return out;
}

}  // namespace brsvd
