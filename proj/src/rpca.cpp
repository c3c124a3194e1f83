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

#include "brsvd/rpca.hpp"

namespace brsvd {

SpectralNormEstimate spectral_norm_estimate(const MatrixStore& store, std::uint64_t seed) {
  SpectralNormEstimate est;
  const Index block_cols = std::max<Index>(1, (Index{32} << 20) / (8 * store.rows()));
  const auto plan = plan_blocks_fixed(store.cols(), (store.cols() + block_cols - 1) / block_cols);
  Vec<double> v = gaussian_matrix<double>(store.cols(), 1, seed, 7);
  v.normalize();
  double previous = 0.0;
  for (int it = 1; it <= kSpectralNormMaxIterations; ++it) {
    Vec<double> w = Vec<double>::Zero(store.rows());
    for_each_block<double>(store, plan, false, [&](Index, ColumnRange r, Mat<double> block) {
      w.noalias() += block * v.segment(r.begin, r.size());
    });
    est.value = w.norm();
    est.iterations = it;
    if (est.value == 0.0) {
      est.zero_matrix = true;
      return est;
    }
    for_each_block<double>(store, plan, false, [&](Index, ColumnRange r, Mat<double> block) {
      v.segment(r.begin, r.size()).noalias() = block.transpose() * w;
    });
    v.normalize();
    if (std::abs(est.value - previous) <= kSpectralNormTolerance * est.value) break;
    previous = est.value;
  }
  return est;
}

RpcaResult<double> ialm_rpca(const MatrixStore& store, const RpcaConfig& cfg, const RpcaObserver& observer) {
  const Mat<double> m = store.read_all<double>();
  return ialm_rpca<double>(m, cfg, observer);
}

}  // namespace brsvd
