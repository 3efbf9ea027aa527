#pragma once

// Per-point results of a θ-grid evaluation (identified set or confidence
// set), coordinate projections, and CSV/JSON output.

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "blpid/core.hpp"

namespace blpid {

struct GridPoint {
  std::vector<double> coordinates;
  bool member = false;
  double statistic = kNaN;  // min slackened moment (identified set) or T_n
  double critical = kNaN;   // critical value (confidence sets only)
};

struct GridDiagnostics {
  long inversion_failures = 0;
  int failed_markets = 0;
  int dropped_moments = 0;
};

class GridResult {
 public:
  GridResult() = default;
  explicit GridResult(std::vector<std::string> names) : names_(std::move(names)) {}

  void add(std::vector<double> coordinates, bool member, double statistic, double critical = kNaN) {
    points_.push_back({std::move(coordinates), member, statistic, critical});
  }

  /// Recomputes projections and the empty flag from the stored points.
  void finalize() {
    projections_.assign(names_.size(), Interval{});
    members_ = 0;
    for (const auto& p : points_) {
      if (!p.member) continue;
      ++members_;
      for (std::size_t k = 0; k < names_.size(); ++k) projections_[k].include(p.coordinates[k]);
    }
  }

  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<GridPoint>& points() const noexcept { return points_; }
  const std::vector<Interval>& projections() const noexcept { return projections_; }
  std::size_t member_count() const noexcept { return members_; }
  bool empty() const noexcept { return members_ == 0; }

  /// Projection of coordinate `name`; throws if unknown.
  const Interval& projection(const std::string& name) const {
    for (std::size_t k = 0; k < names_.size(); ++k)
      if (names_[k] == name) return projections_[k];
    throw ConfigError("no grid coordinate named " + name);
  }

  /// Member parameter values, decoded with the grid that produced them.
  std::vector<ParamTheta> members(const ThetaGrid& grid) const {
    std::vector<ParamTheta> out;
    for (const auto& p : points_)
      if (p.member) out.push_back(grid.from_coordinates(p.coordinates));
    return out;
  }

  GridDiagnostics diagnostics;

 private:
  std::vector<std::string> names_;
  std::vector<GridPoint> points_;
  std::vector<Interval> projections_;
  std::size_t members_ = 0;
};

namespace detail {
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

/// One row per grid point: coordinates, member flag, statistic and, when
/// present, the critical value.
inline void write_grid_csv(const GridResult& r, const std::string& path, bool with_critical) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  for (const auto& n : r.names()) f << n << ',';
  f << "member," << (with_critical ? "T_n,critical" : "min_moment") << '\n';
  for (const auto& p : r.points()) {
    for (double c : p.coordinates) f << detail::fmt17(c) << ',';
    f << (p.member ? 1 : 0) << ',' << detail::fmt17(p.statistic);
    if (with_critical) f << ',' << detail::fmt17(p.critical);
    f << '\n';
  }
}

inline nlohmann::json interval_json(const Interval& iv) {
  if (iv.empty()) return nullptr;
  return nlohmann::json::array({iv.lo, iv.hi});
}

inline nlohmann::json grid_summary_json(const GridResult& r) {
  nlohmann::json j;
  j["points"] = r.points().size();
  j["members"] = r.member_count();
  j["empty"] = r.empty();
  nlohmann::json proj = nlohmann::json::object();
  for (std::size_t k = 0; k < r.names().size(); ++k) proj[r.names()[k]] = interval_json(r.projections()[k]);
  j["projections"] = proj;
  j["diagnostics"] = {{"inversion_failures", r.diagnostics.inversion_failures},
                      {"failed_markets", r.diagnostics.failed_markets},
                      {"dropped_moments", r.diagnostics.dropped_moments}};
  return j;
}

}  // namespace blpid
