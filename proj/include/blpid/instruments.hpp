#pragma once

// Indicator instrument functions g(z) ∈ {0,1}: hypercubes in Φ-transformed
// instrument space, or explicit one/two-dimensional combinations.

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "blpid/core.hpp"

namespace blpid {

/// One explicit combination: a tuple of instrument columns, each cut into
/// `cells[k]` equal slices of (0,1] after the Φ transform.
struct ComboSpec {
  std::vector<int> columns;
  std::vector<int> cells;
};

struct InstrumentSpec {
  enum class Kind { kHypercube, kCombos };
  Kind kind = Kind::kHypercube;
  std::vector<int> columns;  // hypercube: instrument subset, empty = all
  int r0 = 1;
  int R = 3;
  std::vector<ComboSpec> combos;
  bool standardize = true;  // centre and scale each column before Φ
  int min_count = 5;        // functions active on fewer markets are flagged
};

/// Number of hypercube functions for d_z instruments: Σ_{r=r0}^{R} (2r)^{d_z}.
inline std::size_t hypercube_count(int dz, int r0, int R) {
  if (R < r0 || r0 < 1 || dz < 1) throw ConfigError("hypercube needs 1 <= r0 <= R and d_z >= 1");
  std::size_t n = 0;
  for (int r = r0; r <= R; ++r) {
    std::size_t c = 1;
    for (int u = 0; u < dz; ++u) c *= static_cast<std::size_t>(2 * r);
    n += c;
  }
  return n;
}

/// Number of functions in an explicit combination list.
inline std::size_t combo_count(const std::vector<ComboSpec>& combos) {
  std::size_t n = 0;
  for (const auto& c : combos) {
    std::size_t k = 1;
    for (int q : c.cells) k *= static_cast<std::size_t>(q);
    n += k;
  }
  return n;
}

/// Every single column with `cells_1d` slices, plus the listed column pairs
/// with `cells_2d` slices per dimension.
inline std::vector<ComboSpec> one_and_two_dim_combos(int dz, int cells_1d,
                                                     const std::vector<std::pair<int, int>>& pairs, int cells_2d) {
  std::vector<ComboSpec> out;
  for (int c = 0; c < dz; ++c) out.push_back({{c}, {cells_1d}});
  for (const auto& [a, b] : pairs) out.push_back({{a, b}, {cells_2d, cells_2d}});
  return out;
}

/// Slice index in 1..q for a transformed value in (0,1); slices are
/// left-open, right-closed.
inline int slice_index(double u, int q) {
  const int a = static_cast<int>(std::ceil(u * q));
  return std::clamp(a, 1, q);
}

/// Realized instrument functions on a dataset, in a fixed order.
struct InstrumentFunctionSet {
  std::vector<std::string> labels;
  std::vector<std::vector<char>> active;  // per function, per market
  std::vector<int> counts;
  std::vector<bool> flagged;  // count below min_count

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t retained() const noexcept {
    std::size_t n = 0;
    for (bool f : flagged) n += f ? 0 : 1;
    return n;
  }
};

/// Φ-transformed instrument matrix (markets × d_z).
inline Matrix transformed_instruments(const Dataset& data, bool standardize) {
  const auto M = static_cast<Eigen::Index>(data.size());
  const auto dz = static_cast<Eigen::Index>(data.instruments());
  Matrix z(M, dz);
  for (Eigen::Index i = 0; i < M; ++i) z.row(i) = data[static_cast<std::size_t>(i)].z.transpose();
  const boost::math::normal phi;
  for (Eigen::Index c = 0; c < dz; ++c) {
    double mean = 0.0, sd = 1.0;
    if (standardize) {
      mean = z.col(c).mean();
      sd = std::sqrt((z.col(c).array() - mean).square().mean());
      if (!(sd > 0.0)) sd = 1.0;
    }
    for (Eigen::Index i = 0; i < M; ++i) z(i, c) = boost::math::cdf(phi, (z(i, c) - mean) / sd);
  }
  return z;
}

inline InstrumentFunctionSet build_instruments(const Dataset& data, const InstrumentSpec& spec) {
  const Matrix u = transformed_instruments(data, spec.standardize);
  const auto M = u.rows();
  const int dz = static_cast<int>(u.cols());
  InstrumentFunctionSet out;

  auto add = [&](std::string label, const std::vector<int>& cols, const std::vector<int>& q,
                 const std::vector<int>& target) {
    std::vector<char> act(static_cast<std::size_t>(M), 0);
    int count = 0;
    for (Eigen::Index i = 0; i < M; ++i) {
      bool in = true;
      for (std::size_t k = 0; k < cols.size() && in; ++k) in = slice_index(u(i, cols[k]), q[k]) == target[k];
      act[static_cast<std::size_t>(i)] = in ? 1 : 0;
      count += in ? 1 : 0;
    }
    out.labels.push_back(std::move(label));
    out.active.push_back(std::move(act));
    out.counts.push_back(count);
    out.flagged.push_back(count < spec.min_count);
  };

  // Enumerates all cell tuples of `cols` with per-dimension slice counts q.
  auto enumerate = [&](const std::string& prefix, const std::vector<int>& cols, const std::vector<int>& q) {
    std::vector<int> a(cols.size(), 1);
    for (;;) {
      std::string label = prefix;
      for (std::size_t k = 0; k < cols.size(); ++k)
        label += (k ? "," : "") + std::string("z") + std::to_string(cols[k] + 1) + ":" + std::to_string(a[k]) + "/" +
                 std::to_string(q[k]);
      add(label, cols, q, a);
      std::size_t k = 0;
      while (k < a.size() && ++a[k] > q[k]) a[k++] = 1;
      if (k == a.size()) break;
    }
  };

  if (spec.kind == InstrumentSpec::Kind::kHypercube) {
    if (spec.R < spec.r0 || spec.r0 < 1) throw ConfigError("hypercube instruments need 1 <= r0 <= R");
    std::vector<int> cols = spec.columns;
    if (cols.empty())
      for (int c = 0; c < dz; ++c) cols.push_back(c);
    for (int c : cols)
      if (c < 0 || c >= dz) throw ConfigError("instrument column out of range");
    for (int r = spec.r0; r <= spec.R; ++r)
      enumerate("r=" + std::to_string(r) + " ", cols, std::vector<int>(cols.size(), 2 * r));
  } else {
    if (spec.combos.empty()) throw ConfigError("combination instruments need at least one combination");
    for (const auto& c : spec.combos) {
      if (c.columns.empty() || c.columns.size() > 2 || c.columns.size() != c.cells.size())
        throw ConfigError("each combination needs one or two columns with matching cell counts");
      for (std::size_t k = 0; k < c.columns.size(); ++k) {
        if (c.columns[k] < 0 || c.columns[k] >= dz) throw ConfigError("instrument column out of range");
        if (c.cells[k] < 1) throw ConfigError("cell count must be at least 1");
      }
      enumerate("", c.columns, c.cells);
    }
  }
  if (out.retained() == 0) throw ConfigError("every instrument function has fewer than min_count markets");
  return out;
}

}  // namespace blpid
