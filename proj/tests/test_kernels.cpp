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

#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "brsvd/kernels.hpp"
#include "brsvd/random.hpp"
#include "test_util.hpp"

using namespace brsvd;
using brsvd::testing::uniform_matrix;

namespace {

Mat<double> triple_loop(const Mat<double>& a, bool ta, const Mat<double>& b, bool tb) {
  const Index m = ta ? a.cols() : a.rows();
  const Index k = ta ? a.rows() : a.cols();
  const Index n = tb ? b.rows() : b.cols();
  Mat<double> c = Mat<double>::Zero(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) {
      long double acc = 0;
      for (Index p = 0; p < k; ++p) acc += static_cast<long double>(ta ? a(p, i) : a(i, p)) * (tb ? b(j, p) : b(p, j));
      c(i, j) = static_cast<double>(acc);
    }
  return c;
}

double ortho_defect(const Mat<double>& q) {
  return (q.transpose() * q - Mat<double>::Identity(q.cols(), q.cols())).norm();
}

}  // namespace

TEST_SUITE("gemm") {
  TEST_CASE("identity times M is M") {
    const Mat<double> m = uniform_matrix(3, 2, 1);
    const Mat<double> i3 = Mat<double>::Identity(3, 3);
    CHECK(gemm<double>(1.0, i3, false, m, false, 0.0, Mat<double>()) == m);
  }

  TEST_CASE("zero alpha returns beta * c") {
    const Mat<double> m = uniform_matrix(3, 2, 2);
    const Mat<double> a = uniform_matrix(3, 4, 3);
    const Mat<double> b = uniform_matrix(4, 2, 4);
    CHECK(gemm<double>(0.0, a, false, b, false, 1.0, m) == m);
  }

  TEST_CASE("matches the triple-loop product for every transpose combination") {
    const double eps = machine_epsilon<double>();
    for (int mask = 0; mask < 4; ++mask) {
      const bool ta = mask & 1;
      const bool tb = mask & 2;
      const Mat<double> a = ta ? uniform_matrix(4, 5, 10 + mask) : uniform_matrix(5, 4, 10 + mask);
      const Mat<double> b = tb ? uniform_matrix(3, 4, 20 + mask) : uniform_matrix(4, 3, 20 + mask);
      const Mat<double> got = gemm<double>(a, ta, b, tb);
      const Mat<double> want = triple_loop(a, ta, b, tb);
      CHECK((got - want).cwiseAbs().maxCoeff() <= 8 * eps * a.norm() * b.norm());
    }
  }

  TEST_CASE("alpha and beta combine") {
    const Mat<double> a = uniform_matrix(6, 3, 5);
    const Mat<double> b = uniform_matrix(3, 4, 6);
    const Mat<double> c = uniform_matrix(6, 4, 7);
    const Mat<double> want = 2.5 * triple_loop(a, false, b, false) - 0.5 * c;
    CHECK((gemm<double>(2.5, a, false, b, false, -0.5, c) - want).norm() <= 1e-13);
  }

  TEST_CASE("shape errors name both operands") {
    const Mat<double> a = uniform_matrix(5, 4, 1);
    const Mat<double> b = uniform_matrix(3, 2, 2);
    try {
      gemm<double>(a, false, b, false);
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      const std::string what = e.what();
      CHECK(what.find("5x4") != std::string::npos);
      CHECK(what.find("3x2") != std::string::npos);
    }
    CHECK_THROWS_AS(gemm<double>(1.0, a, true, uniform_matrix(5, 2, 3), false, 1.0, Mat<double>(3, 3)), ShapeError);
  }

  TEST_CASE("block column sums reproduce the full product") {
    const Mat<double> a = uniform_matrix(40, 30, 8);
    const Mat<double> omega = gaussian_matrix<double>(30, 6, 1, 0);
    const Mat<double> full = gemm<double>(a, false, omega, false);
    Mat<double> acc = Mat<double>::Zero(40, 6);
    const Index cuts[] = {0, 7, 8, 21, 30};
    for (int j = 0; j + 1 < 5; ++j) {
      const Index w = cuts[j + 1] - cuts[j];
      acc += gemm<double>(a.middleCols(cuts[j], w), false, omega.middleRows(cuts[j], w), false);
    }
    CHECK((acc - full).cwiseAbs().maxCoeff() <= 4 * machine_epsilon<double>() * a.norm() * omega.norm());
  }
}

TEST_SUITE("random") {
  TEST_CASE("Philox4x32-10 known-answer vectors") {
    using C = Philox4x32::Counter;
    using K = Philox4x32::Key;
    CHECK(Philox4x32::generate(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(Philox4x32::generate(C{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, K{0xffffffffu, 0xffffffffu}) ==
          C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(Philox4x32::generate(C{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, K{0xa4093822u, 0x299f31d0u}) ==
          C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
  }

  TEST_CASE("deterministic") {
    CHECK(gaussian_matrix<double>(17, 9, 42, 3) == gaussian_matrix<double>(17, 9, 42, 3));
    CHECK(gaussian_matrix<double>(17, 9, 42, 3) != gaussian_matrix<double>(17, 9, 43, 3));
  }

  TEST_CASE("row slices equal the one-shot matrix") {
    const Mat<double> full = gaussian_matrix<double>(50, 7, 9, 0);
    CHECK(gaussian_rows<double>(13, 20, 7, 9, 0) == full.middleRows(13, 20));
    CHECK(gaussian_rows<double>(49, 1, 7, 9, 0) == full.bottomRows(1));
    // Odd column counts truncate the last pair, leaving earlier columns unchanged.
    CHECK(gaussian_matrix<double>(50, 6, 9, 0) == full.leftCols(6));
  }

  TEST_CASE("single precision rounds the double stream") {
    CHECK(gaussian_matrix<float>(8, 5, 3, 1) == gaussian_matrix<double>(8, 5, 3, 1).cast<float>());
  }

  TEST_CASE("first two moments at 1e6 samples") {
    const Mat<double> z = gaussian_matrix<double>(100000, 10, 2024, 0);
    const double mean = z.mean();
    const double var = (z.array() - mean).square().sum() / static_cast<double>(z.size() - 1);
    CHECK(std::abs(mean) <= 0.01);
    CHECK(std::abs(var - 1.0) <= 0.01);
  }

  TEST_CASE("distinct streams are uncorrelated") {
    const Mat<double> a = gaussian_matrix<double>(10000, 10, 77, 0);
    const Mat<double> b = gaussian_matrix<double>(10000, 10, 77, 1);
    const auto x = a.reshaped().array() - a.mean();
    const auto y = b.reshaped().array() - b.mean();
    const double corr = (x * y).sum() / std::sqrt(x.square().sum() * y.square().sum());
    CHECK(std::abs(corr) <= 0.01);
  }

  TEST_CASE("empty shape rejected") { CHECK_THROWS_AS(gaussian_matrix<double>(0, 3, 1, 0), ShapeError); }
}

TEST_SUITE("tsqr") {
  TEST_CASE("already orthonormal input") {
    Mat<double> y = Mat<double>::Zero(4, 2);
    y(0, 0) = 1;
    y(1, 1) = 1;
    const auto r = tsqr<double>(y);
    CHECK(r.Q.cwiseAbs().isApprox(y.cwiseAbs(), 1e-15));
    CHECK(!r.rank_warning);
    CHECK(r.numerical_rank == 2);
  }

  TEST_CASE("random 4096 x 34: orthogonality and range residual") {
    const Mat<double> y = uniform_matrix(4096, 34, 5);
    const auto r = tsqr<double>(y, TsqrOptions{256});
    const double eps = machine_epsilon<double>();
    CHECK(ortho_defect(r.Q) <= kOrthoConstant * 34 * eps);
    CHECK((y - r.Q * (r.Q.transpose() * y)).norm() / y.norm() <= 1e-13);
    CHECK((y - r.Q * r.R).norm() / y.norm() <= 1e-13);
    CHECK(r.levels >= 2);
  }

  TEST_CASE("default leaf height still builds a tree") {
    const auto r = tsqr<double>(uniform_matrix(4096, 20, 6));
    CHECK(r.leaf_reads.size() == 3);
    CHECK(r.levels >= 2);
  }

  TEST_CASE("each leaf block is read exactly once") {
    for (const Index height : {Index{68}, Index{100}, Index{333}, Index{1000}}) {
      const auto r = tsqr<double>(uniform_matrix(2000, 34, 7), TsqrOptions{height});
      REQUIRE(!r.leaf_reads.empty());
      for (const int reads : r.leaf_reads) CHECK(reads == 1);
    }
  }

  TEST_CASE("projector equals unblocked Householder") {
    const Mat<double> y = uniform_matrix(3000, 17, 8);
    const auto r = tsqr<double>(y, TsqrOptions{64});
    Eigen::HouseholderQR<Mat<double>> hh(y);
    const Mat<double> q_hh = hh.householderQ() * Mat<double>::Identity(3000, 17);
    CHECK(brsvd::testing::projector_distance(r.Q, q_hh) <= 1e-12);
  }

  TEST_CASE("R is upper triangular with non-negative diagonal") {
    const auto r = tsqr<double>(uniform_matrix(500, 12, 9), TsqrOptions{40});
    CHECK(r.R.isUpperTriangular(0.0));
    CHECK(r.R.diagonal().minCoeff() >= 0.0);
  }

  TEST_CASE("rank-deficient input warns and reports its numerical rank") {
    const Mat<double> y = brsvd::testing::lowrank_matrix(600, 10, 4, 10);
    const auto r = tsqr<double>(y, TsqrOptions{50});
    CHECK(r.rank_warning);
    CHECK(r.numerical_rank == 4);
    CHECK((y - r.Q * r.R).norm() / y.norm() <= 1e-13);
  }

  TEST_CASE("single precision") {
    const Mat<float> y = uniform_matrix(1000, 10, 11).cast<float>();
    const auto r = tsqr<float>(y, TsqrOptions{100});
    const Mat<float> d = r.Q.transpose() * r.Q - Mat<float>::Identity(10, 10);
    CHECK(d.norm() <= kOrthoConstant * 10 * machine_epsilon<float>());
  }

  TEST_CASE("wide input rejected") { CHECK_THROWS_AS(tsqr<double>(uniform_matrix(3, 4, 1)), ShapeError); }
}

TEST_SUITE("small_svd") {
  TEST_CASE("diagonal input") {
    Mat<double> b = Mat<double>::Zero(3, 5);
    b(0, 0) = 3;
    b(1, 1) = 2;
    b(2, 2) = 1;
    const auto f = small_svd<double>(b);
    CHECK((f.sigma - Vec<double>{{3.0, 2.0, 1.0}}).norm() <= 1e-14);
    CHECK(f.U.cwiseAbs().isApprox(Mat<double>::Identity(3, 3), 1e-14));
  }

  TEST_CASE("squared singular values match Gram eigenvalues") {
    const Mat<double> b = uniform_matrix(8, 20, 12);
    const auto f = small_svd<double>(b);
    Eigen::SelfAdjointEigenSolver<Mat<double>> eig(b * b.transpose());
    const Vec<double> ev = eig.eigenvalues().reverse();  // ascending -> descending
    for (Index i = 0; i < 8; ++i) CHECK(std::abs(f.sigma(i) * f.sigma(i) - ev(i)) / ev(i) <= 1e-10);
  }

  TEST_CASE("reconstruction, orthonormality, ordering") {
    const Mat<double> b = uniform_matrix(15, 90, 13);
    const auto f = small_svd<double>(b);
    const double eps = machine_epsilon<double>();
    CHECK((b - f.reconstruct()).norm() <= kOrthoConstant * 15 * eps * b.norm());
    CHECK(ortho_defect(f.U) <= kOrthoConstant * 15 * eps);
    CHECK(ortho_defect(f.Vt.transpose()) <= kOrthoConstant * 15 * eps);
    for (Index i = 0; i + 1 < f.sigma.size(); ++i) CHECK(f.sigma(i) >= f.sigma(i + 1));
    CHECK(f.sigma.minCoeff() >= 0.0);
  }

  TEST_CASE("rank-2 input has vanishing trailing values") {
    const Mat<double> b = uniform_matrix(4, 2, 14) * uniform_matrix(2, 30, 15);
    const auto f = small_svd<double>(b);
    CHECK(f.sigma(2) <= 1e-12 * f.sigma(0));
    CHECK(f.sigma(3) <= 1e-12 * f.sigma(0));
  }

  TEST_CASE("square input") {
    const Mat<double> b = uniform_matrix(6, 6, 16);
    const auto f = small_svd<double>(b);
    CHECK((b - f.reconstruct()).norm() <= 1e-13 * b.norm());
  }

  TEST_CASE("tall input rejected") { CHECK_THROWS_AS(small_svd<double>(uniform_matrix(5, 4, 1)), ShapeError); }

  TEST_CASE("sort_descending is stable on ties") {
    Mat<double> u = Mat<double>::Identity(3, 3);
    Vec<double> s{{1.0, 2.0, 2.0}};
    Mat<double> vt = Mat<double>::Identity(3, 3);
    sort_descending(u, s, vt);
    CHECK(s == Vec<double>{{2.0, 2.0, 1.0}});
    CHECK(u(1, 0) == 1.0);
    CHECK(u(2, 1) == 1.0);
    CHECK(vt(0, 1) == 1.0);
  }
}
