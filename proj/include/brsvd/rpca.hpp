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

// Robust PCA by the inexact augmented Lagrange multiplier method, with a
// randomized SVD for the singular value thresholding step.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "brsvd/randomized_svd.hpp"

namespace brsvd {

/// Soft threshold: x - eps above eps, x + eps below -eps, zero in between.
template <RealScalar Scalar>
Scalar shrink(Scalar x, Scalar epsilon) {
  if (epsilon < Scalar(0)) throw ConfigError("shrink: negative threshold " + std::to_string(epsilon));
  if (x > epsilon) return x - epsilon;
  if (x < -epsilon) return x + epsilon;
  return Scalar(0);
}

template <typename Derived>
auto shrink(const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar epsilon) {
  using Scalar = typename Derived::Scalar;
  if (epsilon < Scalar(0)) throw ConfigError("shrink: negative threshold " + std::to_string(epsilon));
  return x.unaryExpr([epsilon](Scalar v) { return shrink<Scalar>(v, epsilon); }).eval();
}

struct SpectralNormEstimate {
  double value = 0.0;
  int iterations = 0;
  bool zero_matrix = false;
};

inline constexpr int kSpectralNormMaxIterations = 100;
inline constexpr double kSpectralNormTolerance = 1e-12;

/**
 * Largest singular value by power iteration on M^T M from a seeded Gaussian
 * start; stops when the estimate changes by less than 1e-12 relative or after
 * 100 iterations.
 */
template <RealScalar Scalar>
SpectralNormEstimate spectral_norm_estimate(const ConstRef<Scalar>& m, std::uint64_t seed = 0) {
  SpectralNormEstimate est;
  Vec<double> v = gaussian_matrix<double>(m.cols(), 1, seed, 7);
  v.normalize();
  const Mat<double> md = m.template cast<double>();
  double previous = 0.0;
  for (int it = 1; it <= kSpectralNormMaxIterations; ++it) {
    const Vec<double> w = md * v;
    est.value = w.norm();
    est.iterations = it;
    if (est.value == 0.0) {
      est.zero_matrix = true;
      return est;
    }
    v = md.transpose() * w;
    v.normalize();
    if (std::abs(est.value - previous) <= kSpectralNormTolerance * est.value) break;
    previous = est.value;
  }
  return est;
}

/// Store version: two streamed passes per iteration (M v, then M^T w).
SpectralNormEstimate spectral_norm_estimate(const MatrixStore& store, std::uint64_t seed = 0);

struct RpcaConfig {
  Index target_rank = 10;
  Index oversampling = 10;
  int power_exponent = 1;
  /// Defaults to 1 / sqrt(max(m, n)).
  std::optional<double> lambda;
  /// Defaults to 1.25 / ||M||_2.
  std::optional<double> mu0;
  double rho = 1.5;
  double tol = 1e-7;
  int max_iterations = 100;
  std::uint64_t master_seed = 0;
  /// Iterates larger than this are decomposed out of core through a scratch store.
  std::uint64_t memory_budget = kUnlimitedBudget;
  std::filesystem::path scratch_dir = std::filesystem::temp_directory_path();

  void validate() const {
    if (lambda && !(*lambda > 0.0)) throw ConfigError("rpca: lambda must be positive");
    if (mu0 && !(*mu0 > 0.0)) throw ConfigError("rpca: mu0 must be positive");
    if (!(rho > 1.0)) throw ConfigError("rpca: rho must exceed 1");
    if (!(tol > 0.0)) throw ConfigError("rpca: tol must be positive");
    if (max_iterations < 1) throw ConfigError("rpca: max_iterations must be positive");
  }
};

struct RpcaIteration {
  int i = 0;
  double mu = 0.0;
  double residual = 0.0;
  double svd_seconds = 0.0;
  double iter_seconds = 0.0;
  Index shrunk_rank = 0;  // singular values surviving the threshold
  bool out_of_core = false;
};

template <RealScalar Scalar>
struct RpcaResult {
  Mat<Scalar> L;
  Mat<Scalar> S;
  int iterations = 0;
  std::vector<double> residual_history;
  std::vector<RpcaIteration> trace;
  bool converged = false;
  double lambda = 0.0;
  double mu0 = 0.0;

  /// {i, mu, residual, svd_seconds, iter_seconds}, one line per iteration.
  std::string to_json_lines() const {
    std::string out;
    for (const auto& it : trace) {
      out += nlohmann::json{{"i", it.i},
                            {"mu", it.mu},
                            {"residual", it.residual},
                            {"svd_seconds", it.svd_seconds},
                            {"iter_seconds", it.iter_seconds}}
                 .dump();
      out += '\n';
    }
    return out;
  }
};

using RpcaObserver = std::function<void(const RpcaIteration&)>;

/**
 * min ||L||_* + lambda ||S||_1 subject to M = L + S.
 *
 *   Y_0 = M / max(||M||_2, ||M||_inf / lambda), S_0 = 0, mu_i = mu0 rho^i
 *   (U, S, V^T) = rsvd(M - S_i + Y_i / mu_i)
 *   L_{i+1} = U shrink(S, 1/mu_i) V^T
 *   S_{i+1} = shrink(M - L_{i+1} + Y_i / mu_i, lambda / mu_i)
 *   Y_{i+1} = Y_i + mu_i (M - L_{i+1} - S_{i+1})
 *
 * until ||M - L - S||_F / ||M||_F < tol. ||M||_inf is the largest absolute entry.
 * Hitting max_iterations returns converged = false.
 */
template <RealScalar Scalar>
RpcaResult<Scalar> ialm_rpca(const ConstRef<Scalar>& m, const RpcaConfig& cfg, const RpcaObserver& observer = {}) {
  using clock = std::chrono::steady_clock;
  cfg.validate();
  const Index rows = m.rows();
  const Index cols = m.cols();

  const double norm_fro = static_cast<double>(m.template cast<double>().norm());
  if (norm_fro == 0.0) throw ConfigError("rpca: input matrix is zero");
  const double norm_two = spectral_norm_estimate<Scalar>(m, cfg.master_seed).value;
  const double norm_inf = static_cast<double>(m.cwiseAbs().maxCoeff());

  RpcaResult<Scalar> res;
  res.lambda = cfg.lambda.value_or(1.0 / std::sqrt(static_cast<double>(std::max(rows, cols))));
  res.mu0 = cfg.mu0.value_or(1.25 / norm_two);

  SketchConfig sketch;
  sketch.target_rank = cfg.target_rank;
  sketch.oversampling = cfg.oversampling;
  sketch.power_exponent = cfg.power_exponent;
  sketch.master_seed = cfg.master_seed;
  sketch.memory_budget = cfg.memory_budget;
  sketch.validate(rows, cols);

  const std::uint64_t iterate_bytes =
      static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(cols) * sizeof(Scalar);
  const bool out_of_core = iterate_bytes > cfg.memory_budget;
  std::optional<MatrixStore> scratch;
  std::filesystem::path scratch_path;
  if (out_of_core) {
    scratch_path = cfg.scratch_dir / ("rpca_iterate_" + std::to_string(std::random_device{}()) + ".oocm");
    scratch.emplace(MatrixStore::create(scratch_path, rows, cols, element_type_of<Scalar>(), true));
  }
  struct ScratchCleanup {
    std::optional<MatrixStore>& store;
    std::filesystem::path path;
    ~ScratchCleanup() {
      if (store) {
        store.reset();
        std::error_code ec;
        std::filesystem::remove(path, ec);
      }
    }
  } cleanup{scratch, scratch_path};

  Mat<Scalar> y = m / static_cast<Scalar>(std::max(norm_two, norm_inf / res.lambda));
  res.S = Mat<Scalar>::Zero(rows, cols);
  res.L = Mat<Scalar>::Zero(rows, cols);

  for (int i = 0; i < cfg.max_iterations; ++i) {
    const auto t0 = clock::now();
    const double mu = res.mu0 * std::pow(cfg.rho, i);
    const auto inv_mu = static_cast<Scalar>(1.0 / mu);

    SvdFactors<Scalar> f;
    if (out_of_core) {
      const auto plan = plan_blocks(cols, rows, sketch.l(), sizeof(Scalar), cfg.memory_budget);
      for (const auto& r : plan.blocks) {
        const Mat<Scalar> block =
            m.middleCols(r.begin, r.size()) - res.S.middleCols(r.begin, r.size()) + inv_mu * y.middleCols(r.begin, r.size());
        scratch->write_block<Scalar>(r, block);
      }
      f = brsvd_run<Scalar>(*scratch, sketch).factors;
    } else {
      const Mat<Scalar> iterate = m - res.S + inv_mu * y;
      f = rsvd_incore<Scalar>(iterate, sketch);
    }
    const auto t1 = clock::now();

    const Vec<Scalar> sigma = shrink(f.sigma, inv_mu);
    Index kept = 0;
    for (Index j = 0; j < sigma.size(); ++j) kept += sigma(j) > Scalar(0) ? 1 : 0;
    res.L.noalias() = f.U.leftCols(kept) * sigma.head(kept).asDiagonal() * f.Vt.topRows(kept);
    if (kept == 0) res.L.setZero();

    res.S = shrink(Mat<Scalar>(m - res.L + inv_mu * y), static_cast<Scalar>(res.lambda / mu));
    const Mat<Scalar> z = m - res.L - res.S;
    y += static_cast<Scalar>(mu) * z;

    const double residual = static_cast<double>(z.template cast<double>().norm()) / norm_fro;
    res.residual_history.push_back(residual);
    res.iterations = i + 1;
    const std::chrono::duration<double> svd_dt = t1 - t0;
    const std::chrono::duration<double> iter_dt = clock::now() - t0;
    res.trace.push_back({i, mu, residual, svd_dt.count(), iter_dt.count(), kept, out_of_core});
    if (observer) observer(res.trace.back());
    if (residual < cfg.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

/// Loads the store and solves in memory; the inner SVD still goes out of core when the iterate exceeds the budget.
RpcaResult<double> ialm_rpca(const MatrixStore& store, const RpcaConfig& cfg, const RpcaObserver& observer = {});

}  // namespace brsvd
