#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hippo/model.hpp"

namespace hippo {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SparseRow {
  double label = 0.0;
  /// (0-based feature index, value), strictly increasing indices.
  std::vector<std::pair<std::size_t, double>> features;

  friend bool operator==(const SparseRow&, const SparseRow&) = default;
};

struct Dataset {
  std::vector<SparseRow> rows;
  std::size_t dim = 0;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Parses "label idx:val idx:val ..." lines (indices 1-based, strictly
/// increasing). Blank lines are skipped. Errors carry the 1-based line number.
Dataset parse_libsvm(std::string_view text, std::optional<std::size_t> declared_dim = {});
Dataset read_libsvm_file(const std::string& path, std::optional<std::size_t> declared_dim = {});

/// Shortest round-trip formatting of every value.
std::string serialize_libsvm(const Dataset& ds);

/// Dense (features, labels) for a subset of rows.
std::pair<Mat, Vec> densify(const Dataset& ds, std::span<const std::size_t> row_ids);
std::pair<Mat, Vec> densify(const Dataset& ds);

/// Column-wise zero-mean / unit-variance scaling of the features. Constant
/// columns are centered only.
Dataset standardize(const Dataset& ds);

struct AgentData {
  Mat a;
  Vec b;
};

/// Splits rows across agents; sizes differ by at most one, the first
/// (rows mod m) agents get the extra row. With a seed, rows are shuffled first.
std::vector<AgentData> partition_even(const Dataset& ds, std::size_t agents,
                                      std::optional<std::uint64_t> shuffle_seed = {});

/// Row ids assigned to each agent (the index form of partition_even).
std::vector<std::vector<std::size_t>> partition_rows(std::size_t rows, std::size_t agents,
                                                     std::optional<std::uint64_t> shuffle_seed);

struct SyntheticInstance {
  std::vector<AgentData> agents;
  Vec planted;
};

/// Standard normal features, planted N(0,1) solution, b = A x + noise.
/// With condition > 1 the feature columns are rescaled geometrically so the
/// local Hessians are ill-conditioned (roughly by that factor).
SyntheticInstance synth_least_squares(std::size_t agents, std::size_t dim,
                                      std::size_t rows_per_agent, double noise_sigma,
                                      std::uint64_t seed, double condition = 1.0);

std::vector<LocalObjective> make_objectives(const std::vector<AgentData>& data, double ridge);

}  // namespace hippo
