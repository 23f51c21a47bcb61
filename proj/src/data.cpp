#include "hippo/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace hippo {
namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw DataError("libsvm line " + std::to_string(line) + ": " + what);
}

bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  if (tok.empty()) return false;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

bool parse_index(std::string_view tok, std::size_t& out) {
  if (tok.empty()) return false;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

void append_double(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

Dataset parse_libsvm(std::string_view text, std::optional<std::size_t> declared_dim) {
  Dataset ds;
  std::size_t line_no = 0;
  std::size_t max_index = 0;
  while (!text.empty()) {
    ++line_no;
    auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    std::vector<std::string_view> tokens;
    std::size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
      std::size_t start = pos;
      while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t') ++pos;
      if (pos > start) tokens.push_back(line.substr(start, pos - start));
    }
    if (tokens.empty()) continue;

    SparseRow row;
    if (!parse_double(tokens[0], row.label))
      fail(line_no, "malformed label '" + std::string(tokens[0]) + "'");
    std::size_t prev = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      auto tok = tokens[t];
      auto colon = tok.find(':');
      if (colon == std::string_view::npos) fail(line_no, "malformed token '" + std::string(tok) + "'");
      std::size_t idx = 0;
      double val = 0.0;
      if (!parse_index(tok.substr(0, colon), idx) || idx == 0)
        fail(line_no, "malformed index in '" + std::string(tok) + "'");
      if (!parse_double(tok.substr(colon + 1), val))
        fail(line_no, "malformed value in '" + std::string(tok) + "'");
      if (idx <= prev) fail(line_no, "indices must be strictly increasing");
      if (declared_dim && idx > *declared_dim)
        fail(line_no, "index " + std::to_string(idx) + " exceeds declared dimension " +
                          std::to_string(*declared_dim));
      prev = idx;
      max_index = std::max(max_index, idx);
      row.features.emplace_back(idx - 1, val);
    }
    ds.rows.push_back(std::move(row));
  }
  ds.dim = std::max(declared_dim.value_or(0), max_index);
  return ds;
}

Dataset read_libsvm_file(const std::string& path, std::optional<std::size_t> declared_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open data file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_libsvm(buf.str(), declared_dim);
}

std::string serialize_libsvm(const Dataset& ds) {
  std::string out;
  for (const auto& row : ds.rows) {
    append_double(out, row.label);
    for (const auto& [idx, val] : row.features) {
      out += ' ';
      out += std::to_string(idx + 1);
      out += ':';
      append_double(out, val);
    }
    out += '\n';
  }
  return out;
}

std::pair<Mat, Vec> densify(const Dataset& ds, std::span<const std::size_t> row_ids) {
  Mat a = Mat::Zero(static_cast<Eigen::Index>(row_ids.size()), static_cast<Eigen::Index>(ds.dim));
  Vec b(static_cast<Eigen::Index>(row_ids.size()));
  for (std::size_t r = 0; r < row_ids.size(); ++r) {
    const auto& row = ds.rows.at(row_ids[r]);
    b(static_cast<Eigen::Index>(r)) = row.label;
    for (const auto& [idx, val] : row.features)
      a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(idx)) = val;
  }
  return {std::move(a), std::move(b)};
}

std::pair<Mat, Vec> densify(const Dataset& ds) {
  std::vector<std::size_t> ids(ds.rows.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  return densify(ds, ids);
}

Dataset standardize(const Dataset& ds) {
  auto [a, b] = densify(ds);
  Dataset out;
  out.dim = ds.dim;
  if (a.rows() == 0) return out;
  const Vec mean = a.colwise().mean();
  Vec scale = ((a.rowwise() - mean.transpose()).colwise().squaredNorm() /
               static_cast<double>(a.rows()))
                  .cwiseSqrt()
                  .transpose();
  for (Eigen::Index j = 0; j < scale.size(); ++j)
    if (scale(j) <= 0.0) scale(j) = 1.0;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    SparseRow row;
    row.label = b(r);
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double v = (a(r, j) - mean(j)) / scale(j);
      if (v != 0.0) row.features.emplace_back(static_cast<std::size_t>(j), v);
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::vector<std::vector<std::size_t>> partition_rows(std::size_t rows, std::size_t agents,
                                                     std::optional<std::uint64_t> shuffle_seed) {
  if (agents == 0) throw DataError("partition needs at least one agent");
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle_seed) {
    std::mt19937_64 rng(*shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::vector<std::size_t>> parts(agents);
  const std::size_t base = rows / agents, extra = rows % agents;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < agents; ++i) {
    const std::size_t count = base + (i < extra ? 1 : 0);
    parts[i].assign(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                    order.begin() + static_cast<std::ptrdiff_t>(cursor + count));
    cursor += count;
  }
  return parts;
}

std::vector<AgentData> partition_even(const Dataset& ds, std::size_t agents,
                                      std::optional<std::uint64_t> shuffle_seed) {
  std::vector<AgentData> out;
  for (const auto& ids : partition_rows(ds.rows.size(), agents, shuffle_seed)) {
    auto [a, b] = densify(ds, ids);
    out.push_back({std::move(a), std::move(b)});
  }
  return out;
}

SyntheticInstance synth_least_squares(std::size_t agents, std::size_t dim,
                                      std::size_t rows_per_agent, double noise_sigma,
                                      std::uint64_t seed, double condition) {
  if (!(condition >= 1.0)) throw DataError("synthetic condition number must be at least 1");
  if (agents == 0 || dim == 0 || rows_per_agent == 0)
    throw DataError("synthetic instance sizes must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(dim);
  const auto n = static_cast<Eigen::Index>(rows_per_agent);

  SyntheticInstance inst;
  inst.planted.resize(d);
  for (Eigen::Index k = 0; k < d; ++k) inst.planted(k) = normal(rng);
  for (std::size_t i = 0; i < agents; ++i) {
    AgentData ad{Mat(n, d), Vec(n)};
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index k = 0; k < d; ++k) ad.a(r, k) = normal(rng);
    // column k scaled by condition^{-k / (2(d-1))}, so A^T A has spread ~ condition
    if (d > 1 && condition > 1.0)
      for (Eigen::Index k = 1; k < d; ++k)
        ad.a.col(k) *= std::pow(condition, -0.5 * static_cast<double>(k) / static_cast<double>(d - 1));
    ad.b = ad.a * inst.planted;
    if (noise_sigma > 0.0)
      for (Eigen::Index r = 0; r < n; ++r) ad.b(r) += noise_sigma * normal(rng);
    inst.agents.push_back(std::move(ad));
  }
  return inst;
}

std::vector<LocalObjective> make_objectives(const std::vector<AgentData>& data, double ridge) {
  std::vector<LocalObjective> out;
  out.reserve(data.size());
  for (const auto& ad : data) out.emplace_back(ad.a, ad.b, ridge);
  return out;
}

}  // namespace hippo
