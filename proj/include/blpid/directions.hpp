#pragma once

// Unit directions v used to discretize the support-function inequalities.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "blpid/core.hpp"

namespace blpid {

enum class DirectionTag { kPairwiseDifference, kSignedBasis, kAngular, kCustom };

inline std::string to_string(DirectionTag t) {
  switch (t) {
    case DirectionTag::kPairwiseDifference: return "pairwise-difference";
    case DirectionTag::kSignedBasis: return "signed-basis";
    case DirectionTag::kAngular: return "angular";
    case DirectionTag::kCustom: return "custom";
  }
  return "custom";
}

struct Direction {
  Vector v;
  DirectionTag tag = DirectionTag::kCustom;
};

/// Ordered list of distinct unit directions.
class DirectionSet {
 public:
  DirectionSet() = default;
  explicit DirectionSet(Eigen::Index J) : J_(J) {}

  /// Normalizes `v` and appends it unless an equal direction is present.
  /// Returns false for duplicates.
  bool add(const Vector& v, DirectionTag tag) {
    if (v.size() != J_) throw ConfigError("direction has the wrong length");
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw ConfigError("direction must be nonzero and finite");
    const Vector u = v / n;
    for (const auto& d : dirs_)
      if ((d.v - u).cwiseAbs().maxCoeff() < 1e-12) return false;
    dirs_.push_back({u, tag});
    return true;
  }

  std::size_t size() const noexcept { return dirs_.size(); }
  Eigen::Index products() const noexcept { return J_; }
  const Direction& operator[](std::size_t i) const { return dirs_[i]; }
  const std::vector<Direction>& directions() const noexcept { return dirs_; }

  /// Rows are directions.
  Matrix matrix() const {
    Matrix m(static_cast<Eigen::Index>(dirs_.size()), J_);
    for (std::size_t i = 0; i < dirs_.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = dirs_[i].v.transpose();
    return m;
  }

 private:
  Eigen::Index J_ = 0;
  std::vector<Direction> dirs_;
};

/// ±e_j and ±(e_j − e_k)/√2 for every pair.
inline void add_canonical_directions(DirectionSet& set) {
  const auto J = set.products();
  for (Eigen::Index j = 0; j < J; ++j)
    for (double sgn : {1.0, -1.0}) set.add(sgn * Vector::Unit(J, j), DirectionTag::kSignedBasis);
  for (Eigen::Index j = 0; j < J; ++j)
    for (Eigen::Index k = j + 1; k < J; ++k)
      for (double sgn : {1.0, -1.0})
        set.add(sgn * (Vector::Unit(J, j) - Vector::Unit(J, k)), DirectionTag::kPairwiseDifference);
}

/// Default family. J = 2: the canonical directions plus `angular` equally
/// spaced angles (duplicates dropped). J > 2: canonical directions plus
/// `random_count` seeded uniform directions on the sphere.
inline DirectionSet default_directions(Eigen::Index J, int angular = 64, int random_count = 32,
                                       std::uint64_t seed = 20240601) {
  if (J < 2) throw ConfigError("directions need J >= 2");
  DirectionSet set(J);
  add_canonical_directions(set);
  if (J == 2) {
    for (int k = 0; k < angular; ++k) {
      const double a = 2.0 * std::numbers::pi * k / angular;
      Vector v(2);
      v << std::cos(a), std::sin(a);
      // Snap round-off so exact axis and diagonal angles dedupe.
      for (Eigen::Index i = 0; i < 2; ++i)
        if (std::abs(v[i]) < 1e-15) v[i] = 0.0;
      set.add(v, DirectionTag::kAngular);
    }
    return set;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  int added = 0;
  while (added < random_count) {
    Vector v(J);
    for (Eigen::Index j = 0; j < J; ++j) v[j] = normal(rng);
    if (v.norm() < 1e-8) continue;
    if (set.add(v, DirectionTag::kAngular)) ++added;
  }
  return set;
}

}  // namespace blpid
