// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>

#include "specjudge/error.hpp"

namespace specjudge {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& x, const char* what) {
  if (!x.allFinite()) throw InvalidInput(std::string(what) + ": non-finite value");
}

/// Index of the largest coefficient; ties resolve to the lowest index.
template <typename Derived>
Eigen::Index argmax(const Eigen::MatrixBase<Derived>& x) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < x.size(); ++i) {
    if (x(i) > x(best)) best = i;
  }
  return best;
}

/// Position of entry `idx` in the (value descending, index ascending) order.
/// rank 0 is the argmax.
template <typename Derived>
Eigen::Index rank_of(const Eigen::MatrixBase<Derived>& x, Eigen::Index idx) {
  Eigen::Index ahead = 0;
  const auto v = x(idx);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x(i) > v || (x(i) == v && i < idx)) ++ahead;
  }
  return ahead;
}

template <typename Derived>
typename Derived::Scalar logsumexp(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Scalar m = x.maxCoeff();
  if (m == -std::numeric_limits<Scalar>::infinity()) return m;
  return m + std::log((x.array() - m).exp().sum());
}

/// log softmax(x / temperature), max-subtracted.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> log_softmax(
    const Eigen::MatrixBase<Derived>& logits, typename Derived::Scalar temperature) {
  using Scalar = typename Derived::Scalar;
  if (!(temperature > Scalar(0))) throw InvalidInput("softmax: temperature must be positive");
  require_finite(logits, "softmax");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> z = logits / temperature;
  z.array() -= logsumexp(z);
  return z;
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(
    const Eigen::MatrixBase<Derived>& logits, typename Derived::Scalar temperature = 1) {
  using Scalar = typename Derived::Scalar;
  if (!(temperature > Scalar(0))) throw InvalidInput("softmax: temperature must be positive");
  require_finite(logits, "softmax");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> p = ((logits / temperature).array() -
                                                (logits / temperature).maxCoeff())
                                                   .exp()
                                                   .matrix();
  p /= p.sum();
  return p;
}

/// Shannon entropy in nats; zero-probability entries contribute nothing.
template <typename Derived>
typename Derived::Scalar entropy(const Eigen::MatrixBase<Derived>& probs) {
  using Scalar = typename Derived::Scalar;
  Scalar h = 0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs(i) > Scalar(0)) h -= probs(i) * std::log(probs(i));
  }
  return h;
}

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

/// log(1 + exp(z)) without overflow.
template <typename Scalar>
Scalar softplus(Scalar z) {
  return z > Scalar(0) ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace specjudge
