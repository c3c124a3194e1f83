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

#include "brsvd/cost.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "brsvd/types.hpp"

namespace brsvd {

CostPoly CostPoly::term(long long coeff, int pm, int pn, int pl, int pq) {
  CostPoly p;
  if (coeff != 0) p.terms_[{pm, pn, pl, pq}] = coeff;
  return p;
}

CostPoly& CostPoly::operator+=(const CostPoly& other) {
  for (const auto& [e, c] : other.terms_) {
    auto& slot = terms_[e];
    slot += c;
    if (slot == 0) terms_.erase(e);
  }
  return *this;
}

CostPoly operator*(long long c, CostPoly p) {
  if (c == 0) return {};
  for (auto& [e, coeff] : p.terms_) coeff *= c;
  return p;
}

long double CostPoly::evaluate(long double m, long double n, long double l, long double q) const {
  long double sum = 0;
  for (const auto& [e, c] : terms_) {
    sum += static_cast<long double>(c) * std::pow(m, e[0]) * std::pow(n, e[1]) * std::pow(l, e[2]) * std::pow(q, e[3]);
  }
  return sum;
}

CostPoly CostPoly::leading() const {
  std::pair<int, int> best{-1, -1};
  for (const auto& [e, c] : terms_) best = std::max(best, std::pair{e[0] + e[1], e[2]});
  CostPoly out;
  for (const auto& [e, c] : terms_) {
    if (std::pair{e[0] + e[1], e[2]} == best) out.terms_[e] = c;
  }
  return out;
}

std::string CostPoly::str() const {
  if (terms_.empty()) return "0";
  static constexpr const char* names[] = {"m", "n", "l", "q"};
  std::string out;
  // Highest order first.
  for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
    const auto& [e, c] = *it;
    std::string mono;
    for (int s = 0; s < 4; ++s) {
      if (e[s] == 0) continue;
      mono += names[s];
      if (e[s] > 1) mono += "^" + std::to_string(e[s]);
    }
    const long long mag = c < 0 ? -c : c;
    std::string piece = (mag != 1 || mono.empty()) ? std::to_string(mag) + mono : mono;
    if (out.empty()) out = c < 0 ? "-" + piece : piece;
    else out += (c < 0 ? " - " : " + ") + piece;
  }
  return out;
}

CostReport estimate_costs(long long m, long long n, long long l, int q, CostVariant variant) {
  if (m < 1 || n < 1 || l < 1 || q < 0) throw ConfigError("estimate_costs: dimensions must be positive and q >= 0");
  using P = CostPoly;
  CostReport r;
  r.m = m;
  r.n = n;
  r.l = l;
  r.q = q;
  r.variant = variant;
  //            stage                    line  flops              words (naive)       words (proposed)
  r.rows = {
      {"random number generation", 3, P::term(1, 0, 1, 1), P::term(1, 0, 1, 1), P::zero()},
      {"sampling", 4, P::term(1, 1, 1, 1), P::term(1, 1, 1, 1), P::term(1, 1, 1, 0)},
      {"power iterations", 4, P::term(1, 1, 1, 1, 1), P::term(1, 1, 1, 1, 1), P::zero()},
      {"orthonormalization", 6, P::term(1, 1, 0, 2), P::term(1, 1, 0, 1), P::zero()},
      {"form B", 9, P::term(1, 1, 1, 1), P::term(1, 1, 1, 1), P::term(1, 1, 1, 0)},
      {"SVD", 11, P::term(1, 0, 1, 2), P::term(1, 0, 1, 1), P::zero()},
      {"form U", 12, P::term(1, 1, 0, 2), P::term(1, 1, 0, 2), P::term(1, 1, 0, 1)},
  };
  for (const auto& row : r.rows) {
    r.total_flops += row.flops;
    r.total_words_naive += row.words_naive;
    r.total_words_proposed += row.words_proposed;
  }
  r.matrix_words = variant == CostVariant::naive ? 2 * (P::term(1, 1, 1, 0, 1) + P::term(1, 1, 1, 0))
                                                 : P::term(2, 1, 1, 0);
  return r;
}

CostVariant parse_cost_variant(const std::string& name) {
  if (name == "naive") return CostVariant::naive;
  if (name == "proposed" || name == "block") return CostVariant::proposed;
  throw ConfigError("unknown cost variant '" + name + "' (expected naive or proposed)");
}

std::string to_string(CostVariant v) { return v == CostVariant::naive ? "naive" : "proposed"; }

std::string CostReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& row : rows) {
    rows_json.push_back({{"stage", row.stage},
                         {"line", row.line},
                         {"flops", row.flops.str()},
                         {"words_naive", row.words_naive.str()},
                         {"words_proposed", row.words_proposed.str()},
                         {"flops_value", static_cast<double>(eval(row.flops))},
                         {"words_naive_value", static_cast<double>(eval(row.words_naive))},
                         {"words_proposed_value", static_cast<double>(eval(row.words_proposed))}});
  }
  nlohmann::json j{{"m", m},
                   {"n", n},
                   {"l", l},
                   {"q", q},
                   {"variant", to_string(variant)},
                   {"coefficients", "leading order, unit coefficients"},
                   {"rows", rows_json},
                   {"total_flops", total_flops.str()},
                   {"total_flops_leading", total_flops.leading().str()},
                   {"total_words", total_words().str()},
                   {"total_words_leading", total_words().leading().str()},
                   {"total_words_naive", total_words_naive.str()},
                   {"total_words_proposed", total_words_proposed.str()},
                   {"matrix_words", matrix_words.str()},
                   {"matrix_words_value", static_cast<double>(eval(matrix_words))},
                   {"matrix_passes", static_cast<double>(eval(matrix_words) / (static_cast<long double>(m) * n))},
                   {"total_flops_value", static_cast<double>(eval(total_flops))},
                   {"total_words_value", static_cast<double>(eval(total_words()))}};
  return j.dump(2);
}

std::string CostReport::to_text() const {
  std::ostringstream os;
  os << "cost model (leading order, unit coefficients) m=" << m << " n=" << n << " l=" << l << " q=" << q
     << " variant=" << to_string(variant) << "\n";
  os << "stage                     line  #flops        #words(naive)  #words(proposed)\n";
  for (const auto& row : rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-25s %4d  %-13s %-14s %s\n", row.stage.c_str(), row.line,
                  row.flops.str().c_str(), row.words_naive.str().c_str(), row.words_proposed.str().c_str());
    os << buf;
  }
  os << "total flops:            " << total_flops.str() << "  = " << static_cast<double>(eval(total_flops)) << "\n";
  os << "total words (naive):    " << total_words_naive.str() << "\n";
  os << "total words (proposed): " << total_words_proposed.str() << "\n";
  os << "words of A moved:       " << matrix_words.str() << "  = " << static_cast<double>(eval(matrix_words))
     << " (" << static_cast<double>(eval(matrix_words) / (static_cast<long double>(m) * n)) << " passes)\n";
  return os.str();
}

}  // namespace brsvd
