#pragma once

// Long-format market CSV: one row per (market, product) with columns
// market_id, product_id, share, price, x_1..x_dX, z_1..z_dz and an optional
// s0_ref. Instruments are market-level and must repeat on every row of a
// market.

#include <boost/tokenizer.hpp>

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "blpid/core.hpp"
#include "blpid/grid_result.hpp"

namespace blpid {

/// Column names; empty x/z lists mean "every x_k / z_k column in order".
struct CsvSchema {
  std::string market_id = "market_id";
  std::string product_id = "product_id";
  std::string share = "share";
  std::string price = "price";
  std::vector<std::string> x;
  std::vector<std::string> z;
  std::string outside_share_ref = "s0_ref";  // used when present
};

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
  using Sep = boost::escaped_list_separator<char>;
  boost::tokenizer<Sep> tok(line, Sep('\\', ',', '"'));
  std::vector<std::string> out;
  for (auto s : tok) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : s.substr(b, e - b + 1));
  }
  return out;
}

inline double parse_number(const std::string& s, std::size_t line, const std::string& column) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
    throw DataError("line " + std::to_string(line) + ": column " + column + " is not a number: '" + s + "'");
  return v;
}

inline std::vector<std::string> numbered_columns(const std::vector<std::string>& header, const std::string& prefix) {
  std::vector<std::string> out;
  for (int k = 1;; ++k) {
    const std::string name = prefix + std::to_string(k);
    if (std::find(header.begin(), header.end(), name) == header.end()) break;
    out.push_back(name);
  }
  return out;
}
}  // namespace detail

/// Parses a long-format CSV stream. Inside shares whose market sum is not 1
/// (within 1e−12) are raw quantities and get renormalized; the sum is kept
/// as the market's renormalization factor.
inline Dataset read_dataset(std::istream& in, const CsvSchema& schema = {}) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV is empty");
  const auto header = detail::split_csv_line(line);
  auto find = [&](const std::string& name, bool required) -> int {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      if (required) throw DataError("missing column " + name);
      return -1;
    }
    return static_cast<int>(it - header.begin());
  };
  const int c_market = find(schema.market_id, true), c_product = find(schema.product_id, true);
  const int c_share = find(schema.share, true), c_price = find(schema.price, true);
  const int c_ref = find(schema.outside_share_ref, false);
  const auto x_names = schema.x.empty() ? detail::numbered_columns(header, "x_") : schema.x;
  const auto z_names = schema.z.empty() ? detail::numbered_columns(header, "z_") : schema.z;
  std::vector<int> c_x, c_z;
  for (const auto& n : x_names) c_x.push_back(find(n, true));
  for (const auto& n : z_names) c_z.push_back(find(n, true));

  struct Row {
    std::string product;
    double share, price;
    std::vector<double> x, z;
    std::optional<double> ref;
    std::size_t line;
  };
  std::vector<std::string> order;
  std::map<std::string, std::vector<Row>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != header.size())
      throw DataError("line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) + " fields");
    Row r;
    r.line = lineno;
    r.product = f[static_cast<std::size_t>(c_product)];
    r.share = detail::parse_number(f[static_cast<std::size_t>(c_share)], lineno, schema.share);
    r.price = detail::parse_number(f[static_cast<std::size_t>(c_price)], lineno, schema.price);
    for (std::size_t k = 0; k < c_x.size(); ++k)
      r.x.push_back(detail::parse_number(f[static_cast<std::size_t>(c_x[k])], lineno, x_names[k]));
    for (std::size_t k = 0; k < c_z.size(); ++k)
      r.z.push_back(detail::parse_number(f[static_cast<std::size_t>(c_z[k])], lineno, z_names[k]));
    if (c_ref >= 0 && !f[static_cast<std::size_t>(c_ref)].empty())
      r.ref = detail::parse_number(f[static_cast<std::size_t>(c_ref)], lineno, schema.outside_share_ref);
    if (!(r.share > 0.0)) throw DataError("line " + std::to_string(lineno) + ": nonpositive share");
    const auto& id = f[static_cast<std::size_t>(c_market)];
    auto [it, fresh] = rows.try_emplace(id);
    if (fresh) order.push_back(id);
    it->second.push_back(std::move(r));
  }
  if (order.empty()) throw DataError("CSV has no data rows");

  const std::size_t J = rows[order.front()].size();
  std::vector<MarketObservation> markets;
  std::vector<double> factors;
  for (const auto& id : order) {
    const auto& rs = rows[id];
    if (rs.size() != J)
      throw DataError("market " + id + ": has " + std::to_string(rs.size()) + " products, expected " + std::to_string(J));
    std::set<std::string> seen;
    MarketObservation m;
    m.market_id = id;
    m.inside_shares.resize(static_cast<Eigen::Index>(J));
    m.prices.resize(static_cast<Eigen::Index>(J));
    m.x.resize(static_cast<Eigen::Index>(J), static_cast<Eigen::Index>(c_x.size()));
    m.z = Eigen::Map<const Vector>(rs.front().z.data(), static_cast<Eigen::Index>(c_z.size()));
    double sum = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      const auto& r = rs[j];
      if (!seen.insert(r.product).second) throw DataError("market " + id + ": duplicated product_id " + r.product);
      if (r.z != rs.front().z) throw DataError("market " + id + ": instruments differ across product rows");
      if (r.ref != rs.front().ref) throw DataError("market " + id + ": s0_ref differs across product rows");
      const auto jj = static_cast<Eigen::Index>(j);
      m.inside_shares[jj] = r.share;
      m.prices[jj] = r.price;
      for (std::size_t k = 0; k < c_x.size(); ++k) m.x(jj, static_cast<Eigen::Index>(k)) = r.x[k];
      sum += r.share;
    }
    if (!(sum > 0.0 && sum <= 1.0 + 1e-9)) throw DataError("market " + id + ": share sum outside (0, 1]");
    if (std::abs(sum - 1.0) > 1e-12) {
      m.inside_shares /= sum;
      factors.push_back(sum);
    } else {
      factors.push_back(1.0);
    }
    m.outside_share_ref = rs.front().ref;
    markets.push_back(std::move(m));
  }
  return Dataset(std::move(markets), std::move(factors));
}

inline Dataset load_dataset(const std::string& path, const CsvSchema& schema = {}) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path);
  return read_dataset(f, schema);
}

/// Writes the conditional shares s̃ with full precision, so loading the
/// output reproduces the dataset bit for bit.
inline void write_dataset(std::ostream& out, const Dataset& data) {
  const auto dx = data.characteristics(), dz = data.instruments();
  const bool refs = std::any_of(data.markets().begin(), data.markets().end(),
                                [](const MarketObservation& m) { return m.outside_share_ref.has_value(); });
  out << "market_id,product_id,share,price";
  for (std::size_t k = 1; k <= dx; ++k) out << ",x_" << k;
  for (std::size_t k = 1; k <= dz; ++k) out << ",z_" << k;
  if (refs) out << ",s0_ref";
  out << '\n';
  for (const auto& m : data.markets())
    for (Eigen::Index j = 0; j < m.inside_shares.size(); ++j) {
      out << m.market_id << ',' << j + 1 << ',' << detail::fmt17(m.inside_shares[j]) << ','
          << detail::fmt17(m.prices[j]);
      for (Eigen::Index k = 0; k < m.x.cols(); ++k) out << ',' << detail::fmt17(m.x(j, k));
      for (Eigen::Index k = 0; k < m.z.size(); ++k) out << ',' << detail::fmt17(m.z[k]);
      if (refs) out << ',' << (m.outside_share_ref ? detail::fmt17(*m.outside_share_ref) : std::string());
      out << '\n';
    }
}

inline void save_dataset(const std::string& path, const Dataset& data) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  write_dataset(f, data);
  if (!f) throw ConfigError("failed writing " + path);
}

}  // namespace blpid
