#pragma once

// Synthetic dynamic graph: a fixed Gaussian random partition graph whose
// middle snapshot gets extra edges between two clusters.

#include <toporeg/graph.hpp>

#include <cstdint>
#include <vector>

namespace toporeg {

struct ScenarioConfig {
  int k = 5;
  double size_mean = 20.0;
  double size_std = 1.0;
  double p_in = 0.5;
  double p_out = 0.001;
  double p_add = 0.1;
  int snapshots = 3;
  int bridge_a = 0;
  int bridge_b = 1;
  std::uint64_t seed = 0;
};

inline DynamicGraph bridge_scenario(const ScenarioConfig& cfg) {
  if (cfg.snapshots < 2) throw ValidationError("scenario needs at least two snapshots");
  const SnapshotGraph base = gaussian_partition_graph(cfg.k, cfg.size_mean, cfg.size_std, cfg.p_in, cfg.p_out, cfg.seed);
  const SnapshotGraph bridged = perturb_bridge(base, cfg.bridge_a, cfg.bridge_b, cfg.p_add, cfg.seed ^ 0x5bd1e995ULL);
  std::vector<SnapshotGraph> snapshots;
  const int middle = cfg.snapshots / 2;
  for (int t = 0; t < cfg.snapshots; ++t) snapshots.push_back(t == middle ? bridged : base);
  return DynamicGraph(std::move(snapshots));
}

}  // namespace toporeg
