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

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace brsvd {

/**
 * Polynomial in the symbols m, n, l, q with integer coefficients.
 *
 * Used to carry leading-order flop and word counts symbolically; every
 * stage term has a unit coefficient.
 */
class CostPoly {
 public:
  using Exponents = std::array<int, 4>;  // powers of m, n, l, q

  CostPoly() = default;
  static CostPoly term(long long coeff, int pm, int pn, int pl, int pq = 0);
  static CostPoly zero() { return {}; }

  CostPoly& operator+=(const CostPoly& other);
  friend CostPoly operator+(CostPoly a, const CostPoly& b) { return a += b; }
  friend CostPoly operator*(long long c, CostPoly p);
  friend bool operator==(const CostPoly&, const CostPoly&) = default;

  bool is_zero() const { return terms_.empty(); }
  const std::map<Exponents, long long>& terms() const { return terms_; }

  long double evaluate(long double m, long double n, long double l, long double q) const;

  /**
   * Terms of highest order when m, n >> l and q is a fixed constant: ordered by
   * total degree in (m, n), then degree in l. Powers of q ride along as
   * coefficients, so 2(q+1)mn has leading part 2qmn + 2mn.
   */
  CostPoly leading() const;

  /// Human-readable form such as "2mn + ml" or "mnlq + 2mnl".
  std::string str() const;

 private:
  std::map<Exponents, long long> terms_;
};

enum class CostVariant { naive, proposed };

struct CostRow {
  std::string stage;
  int line = 0;  // line of the block algorithm the stage belongs to
  CostPoly flops;
  CostPoly words_naive;
  CostPoly words_proposed;
};

struct CostReport {
  long long m = 0;
  long long n = 0;
  long long l = 0;
  int q = 0;
  CostVariant variant = CostVariant::proposed;
  std::vector<CostRow> rows;
  CostPoly total_flops;
  CostPoly total_words_naive;
  CostPoly total_words_proposed;
  /// Traffic of A itself: 2(q+1)mn for naive, 2mn for proposed.
  CostPoly matrix_words;

  const CostPoly& total_words() const {
    return variant == CostVariant::naive ? total_words_naive : total_words_proposed;
  }
  long double eval(const CostPoly& p) const {
    return p.evaluate(static_cast<long double>(m), static_cast<long double>(n), static_cast<long double>(l),
                      static_cast<long double>(q));
  }
  std::string to_json() const;
  std::string to_text() const;
};

/// Leading-order flop and word counts per stage, naive vs block algorithm.
CostReport estimate_costs(long long m, long long n, long long l, int q, CostVariant variant);

CostVariant parse_cost_variant(const std::string& name);
std::string to_string(CostVariant v);

}  // namespace brsvd
