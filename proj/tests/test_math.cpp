// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <cmath>
#include <limits>

#include "specjudge/math.hpp"
#include "specjudge/sampling.hpp"

namespace specjudge {
namespace {

using Big = boost::multiprecision::cpp_dec_float_50;

// High-precision softmax used as the reference.
std::vector<Big> big_softmax(const Vector& x, double t) {
  std::vector<Big> e(static_cast<std::size_t>(x.size()));
  Big sum = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    e[static_cast<std::size_t>(i)] = boost::multiprecision::exp(Big(x(i)) / Big(t));
    sum += e[static_cast<std::size_t>(i)];
  }
  for (auto& v : e) v /= sum;
  return e;
}

TEST(Softmax, MatchesMultiprecisionReference) {
  SplitMixRng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(0, 40));
    const double scale = trial % 2 ? 30.0 : 3.0;
    const double t = 0.25 + 2.0 * rng.uniform();
    Vector x(n);
    for (int i = 0; i < n; ++i) x(i) = scale * (2.0 * rng.uniform() - 1.0);
    const Vector p = softmax(x, t);
    const Vector lp = log_softmax(x, t);
    const auto ref = big_softmax(x, t);
    for (int i = 0; i < n; ++i) {
      const double r = static_cast<double>(ref[static_cast<std::size_t>(i)]);
      EXPECT_NEAR(p(i), r, 1e-15 + 1e-13 * r);
      EXPECT_NEAR(lp(i), static_cast<double>(boost::multiprecision::log(ref[static_cast<std::size_t>(i)])), 1e-12);
    }
  }
}

TEST(Softmax, SumsToOneAndShiftInvariant) {
  Vector x(5);
  x << 1.0, -2.0, 700.0, 699.5, 3.0;
  const Vector p = softmax(x, 1.0);
  EXPECT_NEAR(p.sum(), 1.0, 1e-15);
  EXPECT_TRUE(p.allFinite());
  const Vector q = softmax(Vector(x.array() - 1000.0), 1.0);
  EXPECT_LT((p - q).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Softmax, RejectsBadInput) {
  Vector x(3);
  x << 1.0, 2.0, 3.0;
  EXPECT_THROW(softmax(x, 0.0), InvalidInput);
  EXPECT_THROW(softmax(x, -1.0), InvalidInput);
  x(1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(softmax(x, 1.0), InvalidInput);
  x(1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(log_softmax(x, 1.0), InvalidInput);
}

TEST(Softmax, LowTemperatureConcentrates) {
  Vector x(3);
  x << 1.0, 2.0, 1.5;
  EXPECT_GT(softmax(x, 0.01)(1), 1.0 - 1e-12);
  EXPECT_NEAR(softmax(x, 1e6).maxCoeff(), 1.0 / 3.0, 1e-6);
}

TEST(Argmax, TiesGoToLowestIndex) {
  Vector x(4);
  x << 0.5, 2.0, 2.0, 1.0;
  EXPECT_EQ(argmax(x), 1);
  EXPECT_EQ(argmax(Vector(Vector::Zero(6))), 0);
}

TEST(RankOf, OrdersByValueThenIndex) {
  Vector x(5);
  x << 0.1, 3.0, 2.0, 3.0, -1.0;
  EXPECT_EQ(rank_of(x, 1), 0);
  EXPECT_EQ(rank_of(x, 3), 1);
  EXPECT_EQ(rank_of(x, 2), 2);
  EXPECT_EQ(rank_of(x, 0), 3);
  EXPECT_EQ(rank_of(x, 4), 4);
  EXPECT_EQ(rank_of(x, argmax(x)), 0);
}

TEST(RankOf, IsAPermutation) {
  SplitMixRng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Vector x(12);
    for (int i = 0; i < 12; ++i) x(i) = static_cast<double>(rng.uniform_int(0, 4));
    std::vector<int> seen(12, 0);
    for (int i = 0; i < 12; ++i) ++seen[static_cast<std::size_t>(rank_of(x, i))];
    for (int c : seen) EXPECT_EQ(c, 1);
  }
}

TEST(Logsumexp, StableForLargeInputs) {
  Vector x(3);
  x << 1000.0, 1000.0, 1000.0;
  EXPECT_NEAR(logsumexp(x), 1000.0 + std::log(3.0), 1e-12);
  Vector y = Vector::Constant(2, -std::numeric_limits<double>::infinity());
  EXPECT_EQ(logsumexp(y), -std::numeric_limits<double>::infinity());
}

TEST(Entropy, KnownValues) {
  EXPECT_NEAR(entropy(Vector(Vector::Constant(8, 0.125))), std::log(8.0), 1e-14);
  Vector point = Vector::Zero(4);
  point(2) = 1.0;
  EXPECT_EQ(entropy(point), 0.0);
}

TEST(Sigmoid, SymmetricAndStable) {
  for (double z : {-800.0, -30.0, -1.0, 0.0, 0.5, 30.0, 800.0}) {
    EXPECT_NEAR(sigmoid(z) + sigmoid(-z), 1.0, 1e-15);
    EXPECT_TRUE(std::isfinite(softplus(z)));
  }
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(softplus(800.0), 800.0, 1e-12);
  EXPECT_NEAR(softplus(-40.0), std::exp(-40.0), 1e-30);
  EXPECT_NEAR(softplus(3.0) - softplus(-3.0), 3.0, 1e-14);
}

}  // namespace
}  // namespace specjudge
