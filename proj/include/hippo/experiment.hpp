#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hippo/analysis.hpp"
#include "hippo/config.hpp"
#include "hippo/simulator.hpp"

namespace hippo {

/// Network, data and oracle assembled from a config.
struct BuiltProblem {
  Topology topology;
  std::vector<LocalObjective> objectives;
  Regularizer regularizer;
  HyperParams hyper;
  ConvexityConstants constants;
  SpectralConstants spectral;
  OracleSolution oracle;
  std::string data_note;
};

BuiltProblem build_problem(const ExperimentConfig& cfg);

struct SweepPoint {
  double q = 0.0;
  double fraction = 1.0;
  std::string label;  // HIPPO-20, with ", C=0.5" when C is swept
};

struct SweepRun {
  SweepPoint point;
  std::size_t point_index = 0;
  std::uint64_t seed = 0;
  Trace trace;
  std::string file;  // relative to the output directory
};

/// Seed average of the rows that share t in every run of a sweep point.
struct AggregateCurve {
  SweepPoint point;
  std::vector<std::uint64_t> t;
  std::vector<double> rel_loss;
  std::vector<double> comm_cost;
  std::vector<double> comp_cost;
  std::vector<std::string> sources;
  /// exp(slope) of log rel_loss against t.
  double fitted_ratio = 0.0;
};

AggregateCurve aggregate(const SweepPoint& point, const std::vector<const SweepRun*>& runs);

/// First t (or cost) at which the curve is at or below each threshold; nullopt if never.
std::vector<std::optional<double>> threshold_crossings(const std::vector<double>& x, const std::vector<double>& y,
                                                       const std::vector<double>& thresholds);

struct ExperimentResult {
  std::vector<SweepPoint> points;
  std::vector<SweepRun> runs;
  std::vector<AggregateCurve> curves;
  std::optional<TheoremConstants> theorem;
  std::string theorem_note;
  double p_min = 0.0;
  bool diverged = false;
  std::vector<std::string> files;
};

/// Runs every (sweep point, seed) pair, in parallel when threads > 1, and
/// writes traces, aggregate.csv, two plots, summary.txt and metadata.txt.
/// Outputs do not depend on the thread count.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const BuiltProblem& problem, const std::string& out_dir,
                                unsigned threads);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool passed() const;
};

/// Desk-scale property suite: engine equivalence, error bound audit, KKT at the
/// optimum, and expected Lyapunov contraction.
VerifyReport verify(const ExperimentConfig& cfg, const BuiltProblem& problem);

}  // namespace hippo
