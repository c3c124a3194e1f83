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

// Randomized SVD: the in-core baseline, the two-pass block column sampling
// algorithm, and a naive out-of-core baseline that re-streams A for every
// product touching it.

#include <chrono>
#include <cmath>
#include <functional>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "brsvd/kernels.hpp"
#include "brsvd/ooc.hpp"

namespace brsvd {

struct SketchConfig {
  Index target_rank = 10;
  Index oversampling = 10;
  int power_exponent = 1;
  /// Explicit partition count; empty means derive it from memory_budget.
  std::optional<Index> partitions;
  std::uint64_t memory_budget = kUnlimitedBudget;
  std::uint64_t master_seed = 0;
  int q_max = 10;
  /// Overlap reading block j+1 with the products on block j.
  bool prefetch = false;

  Index l() const { return target_rank + oversampling; }

  void validate(Index m, Index n) const {
    if (target_rank < 1) throw ConfigError("target rank must be positive");
    if (oversampling < 0) throw ConfigError("oversampling must be non-negative");
    if (power_exponent < 0) throw ConfigError("power exponent must be non-negative");
    if (power_exponent > q_max) {
      throw ConfigError("power exponent " + std::to_string(power_exponent) + " exceeds q_max " + std::to_string(q_max));
    }
    if (l() > std::min(m, n)) {
      throw ConfigError("sketch width l = k + p = " + std::to_string(l()) + " exceeds min(m, n) = " +
                        std::to_string(std::min(m, n)) + " for a " + shape_string(m, n) + " matrix");
    }
    if (partitions && (*partitions < 1 || *partitions > n)) {
      throw ConfigError("partition count " + std::to_string(*partitions) + " must lie in [1, " + std::to_string(n) + "]");
    }
  }

  BlockPlan plan(Index m, Index n, std::size_t element_size) const {
    return partitions ? plan_blocks_fixed(n, *partitions) : plan_blocks(n, m, l(), element_size, memory_budget);
  }
};

template <RealScalar Scalar>
struct DecompositionResult {
  SvdFactors<Scalar> factors;
  PassStats stats;
  BlockPlan plan;
  Index sample_rank = 0;  // numerical rank of the sample matrix
  bool rank_warning = false;
};

namespace detail {

/// Ratio of the float range above which the unnormalized power iteration is aborted.
inline constexpr double kOverflowFraction = 1e-6;

template <RealScalar Scalar>
void check_sample_range(const Mat<Scalar>& y, int q) {
  const double limit = kOverflowFraction * static_cast<double>(std::numeric_limits<Scalar>::max());
  const double peak = static_cast<double>(y.cwiseAbs().maxCoeff());
  if (!y.allFinite() || peak > limit) {
    throw NumericalError("sample matrix magnitude " + std::to_string(peak) + " exceeds " + std::to_string(limit) +
                         " after power iterations with q=" + std::to_string(q) +
                         "; lower q or rescale the input");
  }
}

// (a a^T)^q a omega, evaluated right to left so no temporary exceeds max(m, n') x l.
template <RealScalar Scalar>
Mat<Scalar> sketch_chain(const ConstRef<Scalar>& a, const ConstRef<Scalar>& omega, int q) {
  Mat<Scalar> t = gemm<Scalar>(a, false, omega, false);
  for (int i = 0; i < q; ++i) {
    const Mat<Scalar> w = gemm<Scalar>(a, true, t, false);
    t = gemm<Scalar>(a, false, w, false);
  }
  return t;
}

// Largest-magnitude entry of every left singular vector made non-negative.
template <RealScalar Scalar>
void apply_sign_convention(Mat<Scalar>& U, Mat<Scalar>& Vt) {
  for (Index j = 0; j < U.cols(); ++j) {
    Index at = 0;
    U.col(j).cwiseAbs().maxCoeff(&at);
    if (U(at, j) < Scalar(0)) {
      U.col(j) *= Scalar(-1);
      Vt.row(j) *= Scalar(-1);
    }
  }
}

template <RealScalar Scalar>
SvdFactors<Scalar> factor_core(const Mat<Scalar>& Q, const Mat<Scalar>& B, Index target_rank) {
  auto core = small_svd<Scalar>(B);
  SvdFactors<Scalar> out;
  out.U = gemm<Scalar>(Q, false, core.U, false);
  out.sigma = std::move(core.sigma);
  out.Vt = std::move(core.Vt);
  out.target_rank = target_rank;
  apply_sign_convention(out.U, out.Vt);
  return out;
}

class StageClock {
 public:
  StageClock(const MatrixStore& store, PassStats& stats, std::string name)
      : store_(store), stats_(stats), name_(std::move(name)), before_(store.stats()),
        start_(std::chrono::steady_clock::now()) {}
  ~StageClock() {
    const auto after = store_.stats();
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start_;
    stats_.stages.push_back(
        {name_, after.words_read - before_.words_read, after.words_written - before_.words_written, dt.count()});
  }
  StageClock(const StageClock&) = delete;
  StageClock& operator=(const StageClock&) = delete;

 private:
  const MatrixStore& store_;
  PassStats& stats_;
  std::string name_;
  PassStats before_;
  std::chrono::steady_clock::time_point start_;
};

inline void finish_stats(const MatrixStore& store, const PassStats& before, PassStats& stats) {
  const auto after = store.stats();
  stats.words_read = after.words_read - before.words_read;
  stats.words_written = after.words_written - before.words_written;
  stats.block_reads = after.block_reads - before.block_reads;
  stats.flop_estimate = after.flop_estimate - before.flop_estimate;
  stats.matrix_words = after.matrix_words;
}

inline std::uint64_t u64(Index v) { return static_cast<std::uint64_t>(v); }

}  // namespace detail

/**
 * In-core randomized SVD: Omega (n x l), Y = (A A^T)^q A Omega, Q = orth(Y),
 * B = Q^T A, B = U~ S V^T, U = Q U~. Omega is stream 0 of master_seed.
 */
template <RealScalar Scalar>
SvdFactors<Scalar> rsvd_incore(const ConstRef<Scalar>& a, const SketchConfig& cfg) {
  const Index m = a.rows();
  const Index n = a.cols();
  cfg.validate(m, n);
  const Mat<Scalar> omega = gaussian_rows<Scalar>(0, n, cfg.l(), cfg.master_seed, 0);
  const Mat<Scalar> y = detail::sketch_chain<Scalar>(a, omega, cfg.power_exponent);
  detail::check_sample_range(y, cfg.power_exponent);
  const Mat<Scalar> q = tsqr<Scalar>(y).Q;
  const Mat<Scalar> b = gemm<Scalar>(q, true, a, false);
  return detail::factor_core(q, b, cfg.target_rank);
}

/**
 * Block randomized SVD over a disk-backed matrix in exactly two passes.
 *
 * Phase 1 reads each column block once and accumulates
 * Y += (A_J A_J^T)^q A_J Omega_J, where Omega_J is rows J of the same Gaussian
 * matrix rsvd_incore draws. Q = tsqr(Y), then phase 2 reads each block once
 * more for B(:, J) = Q^T A_J.
 */
template <RealScalar Scalar>
DecompositionResult<Scalar> brsvd_run(const MatrixStore& store, const SketchConfig& cfg) {
  const Index m = store.rows();
  const Index n = store.cols();
  const Index l = cfg.l();
  const int q = cfg.power_exponent;
  cfg.validate(m, n);

  DecompositionResult<Scalar> out;
  out.plan = cfg.plan(m, n, sizeof(Scalar));
  const PassStats before = store.stats();
  using detail::u64;

  Mat<Scalar> y;
  {
    detail::StageClock clock(store, out.stats, "sketch");
    for_each_block<Scalar>(store, out.plan, cfg.prefetch, [&](Index j, ColumnRange range, Mat<Scalar> block) {
      const Mat<Scalar> omega = gaussian_rows<Scalar>(u64(range.begin), range.size(), l, cfg.master_seed, 0);
      Mat<Scalar> t = detail::sketch_chain<Scalar>(block, omega, q);
      if (j == 0) y = std::move(t);
      else y += t;
      detail::check_sample_range(y, q);
      const std::uint64_t w = u64(range.size());
      store.add_flops(w * u64(l) + u64(m) * w * u64(l) * (1 + u64(q)));
    });
  }

  Mat<Scalar> basis;
  {
    detail::StageClock clock(store, out.stats, "orthonormalize");
    auto qr = tsqr<Scalar>(y);
    y = Mat<Scalar>();
    basis = std::move(qr.Q);
    out.sample_rank = qr.numerical_rank;
    out.rank_warning = qr.rank_warning;
    store.add_flops(u64(m) * u64(l) * u64(l));
  }

  Mat<Scalar> b(l, n);
  {
    detail::StageClock clock(store, out.stats, "form_b");
    for_each_block<Scalar>(store, out.plan, cfg.prefetch, [&](Index, ColumnRange range, Mat<Scalar> block) {
      b.middleCols(range.begin, range.size()) = gemm<Scalar>(basis, true, block, false);
      store.add_flops(u64(m) * u64(range.size()) * u64(l));
    });
  }

  {
    detail::StageClock clock(store, out.stats, "svd_and_form_u");
    out.factors = detail::factor_core(basis, b, cfg.target_rank);
    store.add_flops(u64(n) * u64(l) * u64(l) + u64(m) * u64(l) * u64(l));
  }
  detail::finish_stats(store, before, out.stats);
  return out;
}

/**
 * Randomized SVD that streams A from the store for every product involving it:
 * one pass for A Omega, two per power iteration (A^T Y, then A W), one for B.
 * Reads 2(q + 1) full passes.
 */
template <RealScalar Scalar>
DecompositionResult<Scalar> rsvd_naive_ooc(const MatrixStore& store, const SketchConfig& cfg) {
  const Index m = store.rows();
  const Index n = store.cols();
  const Index l = cfg.l();
  const int q = cfg.power_exponent;
  cfg.validate(m, n);

  DecompositionResult<Scalar> out;
  out.plan = cfg.plan(m, n, sizeof(Scalar));
  const PassStats before = store.stats();
  using detail::u64;

  // Y = sum_J A_J W_J over one pass.
  auto multiply_a = [&](const std::function<Mat<Scalar>(ColumnRange)>& rows_of_w) {
    Mat<Scalar> acc;
    for_each_block<Scalar>(store, out.plan, cfg.prefetch, [&](Index j, ColumnRange range, Mat<Scalar> block) {
      Mat<Scalar> t = gemm<Scalar>(block, false, rows_of_w(range), false);
      if (j == 0) acc = std::move(t);
      else acc += t;
      store.add_flops(u64(m) * u64(range.size()) * u64(l));
    });
    return acc;
  };

  Mat<Scalar> y;
  {
    detail::StageClock clock(store, out.stats, "sketch");
    y = multiply_a([&](ColumnRange r) {
      store.add_flops(u64(r.size()) * u64(l));
      return gaussian_rows<Scalar>(u64(r.begin), r.size(), l, cfg.master_seed, 0);
    });
    detail::check_sample_range(y, 0);
  }
  for (int it = 0; it < q; ++it) {
    Mat<Scalar> w(n, l);
    {
      detail::StageClock clock(store, out.stats, "power_" + std::to_string(it + 1) + "_at");
      for_each_block<Scalar>(store, out.plan, cfg.prefetch, [&](Index, ColumnRange range, Mat<Scalar> block) {
        w.middleRows(range.begin, range.size()) = gemm<Scalar>(block, true, y, false);
      });
    }
    {
      detail::StageClock clock(store, out.stats, "power_" + std::to_string(it + 1) + "_a");
      y = multiply_a([&](ColumnRange r) -> Mat<Scalar> { return w.middleRows(r.begin, r.size()); });
      detail::check_sample_range(y, it + 1);
    }
  }

  Mat<Scalar> basis;
  {
    detail::StageClock clock(store, out.stats, "orthonormalize");
    auto qr = tsqr<Scalar>(y);
    y = Mat<Scalar>();
    basis = std::move(qr.Q);
    out.sample_rank = qr.numerical_rank;
    out.rank_warning = qr.rank_warning;
    store.add_flops(u64(m) * u64(l) * u64(l));
  }

  Mat<Scalar> b(l, n);
  {
    detail::StageClock clock(store, out.stats, "form_b");
    for_each_block<Scalar>(store, out.plan, cfg.prefetch, [&](Index, ColumnRange range, Mat<Scalar> block) {
      b.middleCols(range.begin, range.size()) = gemm<Scalar>(basis, true, block, false);
      store.add_flops(u64(m) * u64(range.size()) * u64(l));
    });
  }

  {
    detail::StageClock clock(store, out.stats, "svd_and_form_u");
    out.factors = detail::factor_core(basis, b, cfg.target_rank);
    store.add_flops(u64(n) * u64(l) * u64(l) + u64(m) * u64(l) * u64(l));
  }
  detail::finish_stats(store, before, out.stats);
  return out;
}

// ---------------------------------------------------------------------------
// Reconstruction error ||A - U S V^T||_F / ||A||_F, accumulated in double.

namespace detail {

struct ErrorAccumulator {
  double residual_sq = 0.0;
  double norm_sq = 0.0;

  template <RealScalar Scalar>
  void add(const Mat<double>& us, const SvdFactors<Scalar>& f, const Mat<Scalar>& block, ColumnRange range) {
    const Mat<double> a = block.template cast<double>();
    const Mat<double> approx = us * f.Vt.middleCols(range.begin, range.size()).template cast<double>();
    residual_sq += (a - approx).squaredNorm();
    norm_sq += a.squaredNorm();
  }

  double ratio() const { return norm_sq == 0.0 ? 0.0 : std::sqrt(residual_sq) / std::sqrt(norm_sq); }
};

template <RealScalar Scalar>
void check_factor_shapes(Index m, Index n, const SvdFactors<Scalar>& f) {
  if (f.U.rows() != m || f.Vt.cols() != n || f.U.cols() != f.sigma.size() || f.Vt.rows() != f.sigma.size()) {
    throw ShapeError("relative_frobenius_error: factors U " + shape_string(f.U.rows(), f.U.cols()) + ", Vt " +
                     shape_string(f.Vt.rows(), f.Vt.cols()) + " do not conform to a " + shape_string(m, n) +
                     " matrix");
  }
}

}  // namespace detail

/// Streams the store in blocks of at most block_cols columns (0: about 32 MiB per block).
template <RealScalar Scalar>
double relative_frobenius_error(const MatrixStore& store, const SvdFactors<Scalar>& f, Index block_cols = 0) {
  const Index m = store.rows();
  const Index n = store.cols();
  detail::check_factor_shapes(m, n, f);
  if (block_cols <= 0) block_cols = std::max<Index>(1, (Index{32} << 20) / (8 * m));
  const auto plan = plan_blocks_fixed(n, (n + block_cols - 1) / block_cols);
  const Mat<double> us = f.U.template cast<double>() * f.sigma.template cast<double>().asDiagonal();
  detail::ErrorAccumulator acc;
  for_each_block<Scalar>(store, plan, false,
                         [&](Index, ColumnRange range, Mat<Scalar> block) { acc.add(us, f, block, range); });
  return acc.ratio();
}

template <RealScalar Scalar>
double relative_frobenius_error(const ConstRef<Scalar>& a, const SvdFactors<Scalar>& f) {
  detail::check_factor_shapes(a.rows(), a.cols(), f);
  const Mat<double> us = f.U.template cast<double>() * f.sigma.template cast<double>().asDiagonal();
  detail::ErrorAccumulator acc;
  acc.add(us, f, Mat<Scalar>(a), {0, a.cols()});
  return acc.ratio();
}

}  // namespace brsvd
