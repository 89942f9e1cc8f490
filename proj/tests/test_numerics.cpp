// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "sinn/numerics.hpp"
#include "sinn/rng.hpp"

using namespace sinn;

TEST_CASE("affine computes Wx + b") {
  SECTION("identity passes the vector through") {
    const Vector y = affine(Matrix::identity(3), {1.0, 2.0, 3.0}, {0.0, 0.0, 0.0});
    CHECK(y == Vector{1.0, 2.0, 3.0});
  }
  SECTION("hand-computed 2x2 case") {
    Matrix w(2, 2);
    w(0, 0) = 1.0;
    w(0, 1) = 1.0;
    w(1, 0) = 0.0;
    w(1, 1) = 2.0;
    const Vector y = affine(w, {3.0, 4.0}, {1.0, 0.0});
    CHECK(y[0] == Catch::Approx(8.0));
    CHECK(y[1] == Catch::Approx(8.0));
  }
  SECTION("zero matrix returns the bias") {
    const Vector y = affine(Matrix(2, 2), {7.0, -1.0}, {5.0, 6.0});
    CHECK(y == Vector{5.0, 6.0});
  }
  SECTION("dimension mismatch throws") {
    CHECK_THROWS_AS(affine(Matrix(2, 3), {1.0, 2.0}, {0.0, 0.0}), ShapeError);
    CHECK_THROWS_AS(affine(Matrix(2, 2), {1.0, 2.0}, {0.0}), ShapeError);
  }
}

TEST_CASE("masked_matvec gates contributions") {
  Matrix w(2, 2);
  w(0, 0) = 7.0;
  w(0, 1) = 2.0;
  w(1, 0) = 3.0;
  w(1, 1) = 4.0;

  SECTION("all-false mask yields zero") {
    const Vector y = masked_matvec(w, Mask(2, 2, false), {1.0, 1.0});
    CHECK(y == Vector{0.0, 0.0});
  }
  SECTION("all-true mask equals plain matvec") {
    CHECK(masked_matvec(w, Mask(2, 2, true), {1.0, 1.0}) == matvec(w, {1.0, 1.0}));
  }
  SECTION("diagonal mask keeps only diagonal products") {
    Mask m(2, 2, false);
    m.at(0, 0) = 1;
    m.at(1, 1) = 1;
    const Vector y = masked_matvec(w, m, {1.0, 1.0});
    CHECK(y == Vector{7.0, 4.0});
  }
  SECTION("masked entries contribute nothing even when they hold garbage") {
    Mask m(2, 2, false);
    m.at(0, 0) = 1;
    m.at(1, 1) = 1;
    Matrix garbage = w;
    garbage(0, 1) = std::numeric_limits<double>::quiet_NaN();
    garbage(1, 0) = std::numeric_limits<double>::infinity();
    const Vector y = masked_matvec(garbage, m, {1.0, 1.0});
    CHECK(y == Vector{7.0, 4.0});
  }
  SECTION("equals affine of the elementwise-masked matrix on random input") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
      Matrix a(3, 4);
      Mask m(3, 4);
      Vector x(4);
      for (double& v : a.data) v = rng.gaussian();
      for (auto& bit : m.data) bit = rng.uniform() < 0.5 ? 1 : 0;
      for (double& v : x) v = rng.gaussian();
      Matrix gated = a;
      apply_mask(gated, m);
      const Vector lhs = masked_matvec(a, m, x);
      const Vector rhs = affine(gated, x, Vector(3, 0.0));
      REQUIRE(lhs.size() == rhs.size());
      for (std::size_t i = 0; i < lhs.size(); ++i) CHECK(lhs[i] == rhs[i]);
    }
  }
}

TEST_CASE("masked_matvec_transposed matches the transposed gated product") {
  Rng rng(11);
  Matrix a(3, 4);
  Mask m(3, 4);
  Vector v(3);
  for (double& x : a.data) x = rng.gaussian();
  for (auto& bit : m.data) bit = rng.uniform() < 0.5 ? 1 : 0;
  for (double& x : v) x = rng.gaussian();
  Matrix gated = a;
  apply_mask(gated, m);
  const Vector lhs = masked_matvec_transposed(a, m, v);
  const Vector rhs = matvec_transposed(gated, v);
  for (std::size_t i = 0; i < lhs.size(); ++i) CHECK(lhs[i] == rhs[i]);
}

TEST_CASE("sigmoid is stable, bounded, and symmetric") {
  CHECK(sigmoid(0.0) == 0.5);
  const double tiny = sigmoid(-40.0);
  CHECK(tiny > 0.0);
  CHECK(tiny < 1e-17);
  CHECK(sigmoid(40.0) <= 1.0);
  for (double z = -30.0; z <= 30.0; z += 0.37)
    CHECK(std::abs(sigmoid(z) + sigmoid(-z) - 1.0) < 1e-15);
  // The positive tail saturates to exactly 1.0 in double (e^-40 is below
  // half an ulp of 1); the negative tail stays strictly positive.
  double prev = -1.0;
  for (double z = -50.0; z <= 50.0; z += 0.5) {
    const double s = sigmoid(z);
    CHECK(s >= prev);
    CHECK(s > 0.0);
    CHECK(s <= 1.0);
    prev = s;
  }
  CHECK(sigmoid(40.0) == 1.0);
}

TEST_CASE("relu clamps negatives") {
  CHECK(relu(-3.2) == 0.0);
  CHECK(relu(1.5) == 1.5);
  CHECK(relu(0.0) == 0.0);
  CHECK(relu(Vector{-1.0, 2.0, 0.0}) == Vector{0.0, 2.0, 0.0});
}

TEST_CASE("clip_global_norm") {
  SECTION("worked example: norm 50 against threshold 25") {
    Vector g{30.0, 40.0};
    const TensorView views[] = {{g.data(), g.size()}};
    const double scale = clip_global_norm(views, 25.0);
    CHECK(scale == 0.5);
    CHECK(g == Vector{15.0, 20.0});
  }
  SECTION("below threshold leaves gradients untouched") {
    Vector g{6.0, 8.0};
    const Vector before = g;
    const TensorView views[] = {{g.data(), g.size()}};
    CHECK(clip_global_norm(views, 25.0) == 1.0);
    CHECK(g == before);
  }
  SECTION("all-zero gradients are a no-op") {
    Vector g{0.0, 0.0, 0.0};
    const TensorView views[] = {{g.data(), g.size()}};
    CHECK(clip_global_norm(views, 25.0) == 1.0);
  }
  SECTION("norm is computed across all tensors jointly") {
    Vector a{30.0};
    Vector b{40.0};
    const TensorView views[] = {{a.data(), a.size()}, {b.data(), b.size()}};
    CHECK(clip_global_norm(views, 25.0) == 0.5);
    CHECK(a[0] == 15.0);
    CHECK(b[0] == 20.0);
  }
  SECTION("post-clip norm bounded and direction preserved on random input") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      Vector g(16);
      for (double& v : g) v = 10.0 * rng.gaussian();
      const Vector before = g;
      const TensorView views[] = {{g.data(), g.size()}};
      const double scale = clip_global_norm(views, 5.0);
      double norm_sq = 0.0;
      for (double v : g) norm_sq += v * v;
      CHECK(std::sqrt(norm_sq) <= 5.0 + 1e-9);
      for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == scale * before[i]);
    }
  }
  SECTION("nonpositive threshold is rejected") {
    Vector g{1.0};
    const TensorView views[] = {{g.data(), g.size()}};
    CHECK_THROWS_AS(clip_global_norm(views, 0.0), Error);
    CHECK_THROWS_AS(clip_global_norm(views, -1.0), Error);
  }
}

TEST_CASE("matvec_transposed is the adjoint of matvec") {
  Rng rng(5);
  Matrix a(3, 4);
  for (double& v : a.data) v = rng.gaussian();
  Vector x(4), y(3);
  for (double& v : x) v = rng.gaussian();
  for (double& v : y) v = rng.gaussian();
  // <Ax, y> == <x, A^T y>
  const Vector ax = matvec(a, x);
  const Vector aty = matvec_transposed(a, y);
  double lhs = 0.0, rhs = 0.0;
  for (int i = 0; i < 3; ++i) lhs += ax[i] * y[i];
  for (int j = 0; j < 4; ++j) rhs += x[j] * aty[j];
  CHECK(lhs == Catch::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("add_outer accumulates u v^T") {
  Matrix acc(2, 3, 1.0);
  add_outer(acc, {2.0, -1.0}, {1.0, 0.0, 3.0});
  CHECK(acc(0, 0) == 3.0);
  CHECK(acc(0, 1) == 1.0);
  CHECK(acc(0, 2) == 7.0);
  CHECK(acc(1, 0) == 0.0);
  CHECK(acc(1, 1) == 1.0);
  CHECK(acc(1, 2) == -2.0);
  CHECK_THROWS_AS(add_outer(acc, {1.0}, {1.0, 2.0, 3.0}), ShapeError);
}
