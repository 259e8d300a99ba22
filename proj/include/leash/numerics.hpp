#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>

#include "leash/errors.hpp"

namespace leash {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Softmax and log-softmax of one sanitized logit vector. Both views come
/// from the same max-shifted exponentials and agree to rounding.
template <typename Scalar>
struct ProbView {
  Vector<Scalar> probs;
  Vector<Scalar> logprobs;

  Eigen::Index size() const { return probs.size(); }
};

/// Indices of the two largest entries; ties go to the lower index.
struct TopTwo {
  Eigen::Index first = 0;
  Eigen::Index second = 1;
};

/// Replaces non-finite components with zero, then clamps to [-band, band].
/// The result scalar is the band's scalar type, so float logits are upcast
/// when a double band is passed.
template <typename Derived, typename Scalar>
Vector<Scalar> sanitize(const Eigen::MatrixBase<Derived>& raw, Scalar band) {
  static_assert(std::is_floating_point_v<Scalar> && sizeof(Scalar) >= 4,
                "sanitized logits need 32-bit precision or better");
  if (raw.size() < 2) {
    throw MalformedInput("logit vector needs at least 2 entries, got " +
                         std::to_string(raw.size()));
  }
  if (!(band > Scalar(0)) || !std::isfinite(band)) {
    throw ConfigError("clip band B must be positive and finite");
  }
  Vector<Scalar> out = raw.template cast<Scalar>();
  for (Eigen::Index v = 0; v < out.size(); ++v) {
    Scalar x = out[v];
    if (!std::isfinite(x)) x = Scalar(0);
    out[v] = std::clamp(x, -band, band);
  }
  return out;
}

template <typename Derived>
ProbView<typename Derived::Scalar> probabilities(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  const Scalar zmax = z.maxCoeff();
  const Vector<Scalar> shifted = z.array() - zmax;
  const Vector<Scalar> expd = shifted.array().exp();
  const Scalar total = expd.sum();  // >= 1, the max entry contributes exp(0)
  ProbView<Scalar> view;
  view.probs = expd / total;
  view.logprobs = shifted.array() - std::log(total);
  return view;
}

template <typename Derived>
TopTwo top_two(const Eigen::MatrixBase<Derived>& x) {
  TopTwo best;
  if (x[1] > x[0]) std::swap(best.first, best.second);
  for (Eigen::Index v = 2; v < x.size(); ++v) {
    if (x[v] > x[best.first]) {
      best.second = best.first;
      best.first = v;
    } else if (x[v] > x[best.second]) {
      best.second = v;
    }
  }
  return best;
}

/// Shannon entropy in nats. Zero-probability entries contribute nothing;
/// the sum is clamped to [0, log V] so rounding cannot leave the range.
template <typename Scalar>
Scalar entropy(const ProbView<Scalar>& p) {
  Scalar h = 0;
  for (Eigen::Index v = 0; v < p.size(); ++v) {
    if (p.probs[v] > Scalar(0)) h -= p.probs[v] * p.logprobs[v];
  }
  return std::clamp(h, Scalar(0), std::log(static_cast<Scalar>(p.size())));
}

/// Gap between the two largest log-probabilities.
template <typename Scalar>
Scalar margin(const ProbView<Scalar>& p) {
  const TopTwo best = top_two(p.logprobs);
  return p.logprobs[best.first] - p.logprobs[best.second];
}

template <typename Scalar>
Scalar peak_probability(const ProbView<Scalar>& p) {
  return p.probs.maxCoeff();
}

}  // namespace leash
