#pragma once

// Snapshot graphs, dynamic graphs and the synthetic scenario generators.

#include <toporeg/errors.hpp>
#include <toporeg/types.hpp>
#include <toporeg/union_find.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

namespace toporeg {

/// Weighted undirected graph observed at a single time step.
///
/// Nodes are indexed locally 0..n-1; `node_ids()` maps local indices back to
/// the external identifiers found in the input. Weights are stored as a dense
/// symmetric matrix with a zero diagonal.
class SnapshotGraph {
 public:
  SnapshotGraph() = default;

  SnapshotGraph(std::vector<std::string> node_ids, Matrix weights,
                std::optional<Labels> labels = std::nullopt)
      : node_ids_(std::move(node_ids)), weights_(std::move(weights)), labels_(std::move(labels)) {
    validate();
  }

  std::size_t num_nodes() const noexcept { return node_ids_.size(); }
  bool empty() const noexcept { return node_ids_.empty(); }

  const std::vector<std::string>& node_ids() const noexcept { return node_ids_; }
  const Matrix& weights() const noexcept { return weights_; }
  double weight(std::size_t u, std::size_t v) const { return weights_(u, v); }

  bool has_labels() const noexcept { return labels_.has_value(); }
  const Labels& labels() const {
    if (!labels_) throw ContractError("snapshot has no ground-truth labels");
    return *labels_;
  }

  /// Number of undirected edges with positive weight.
  std::size_t num_edges() const {
    std::size_t count = 0;
    for (Eigen::Index i = 0; i < weights_.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < weights_.cols(); ++j) {
        if (weights_(i, j) > 0.0) ++count;
      }
    }
    return count;
  }

  /// Upper-triangle edge list (u < v, w > 0).
  std::vector<std::tuple<std::size_t, std::size_t, double>> edges() const {
    std::vector<std::tuple<std::size_t, std::size_t, double>> out;
    for (Eigen::Index i = 0; i < weights_.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < weights_.cols(); ++j) {
        if (weights_(i, j) > 0.0) {
          out.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j), weights_(i, j));
        }
      }
    }
    return out;
  }

 private:
  void validate() const {
    const auto n = static_cast<Eigen::Index>(node_ids_.size());
    if (weights_.rows() != n || weights_.cols() != n) {
      throw ValidationError("weight matrix shape does not match node count");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (weights_(i, i) != 0.0) throw ValidationError("self-loop on node " + node_ids_[i]);
      for (Eigen::Index j = 0; j < n; ++j) {
        const double w = weights_(i, j);
        if (!std::isfinite(w) || w < 0.0) throw ValidationError("edge weights must be finite and non-negative");
        if (w != weights_(j, i)) throw ValidationError("weight matrix is not symmetric");
      }
    }
    std::unordered_map<std::string, int> seen;
    for (const auto& id : node_ids_) {
      if (!seen.emplace(id, 0).second) throw ValidationError("duplicate node id " + id);
    }
    if (labels_ && labels_->size() != node_ids_.size()) {
      throw ValidationError("labels do not cover every node");
    }
  }

  std::vector<std::string> node_ids_;
  Matrix weights_;
  std::optional<Labels> labels_;
};

/// Ordered sequence of snapshots G^(0..T).
class DynamicGraph {
 public:
  explicit DynamicGraph(std::vector<SnapshotGraph> snapshots) : snapshots_(std::move(snapshots)) {
    if (snapshots_.size() < 2) throw ValidationError("a dynamic graph needs at least two snapshots");
  }

  /// Number of time steps; snapshots are indexed 0..T.
  std::size_t steps() const noexcept { return snapshots_.size() - 1; }
  std::size_t size() const noexcept { return snapshots_.size(); }

  const SnapshotGraph& operator[](std::size_t t) const { return snapshots_.at(t); }
  const std::vector<SnapshotGraph>& snapshots() const noexcept { return snapshots_; }

 private:
  std::vector<SnapshotGraph> snapshots_;
};

/// Sum over the full symmetric weight matrix: every undirected edge counts twice.
inline double total_edge_weight(const SnapshotGraph& g) { return g.empty() ? 0.0 : g.weights().sum(); }

/// Â = D^{-1/2}(A + I)D^{-1/2}, with D the degree matrix of A + I.
struct NormalizedAdjacency {
  Matrix matrix;
};

inline NormalizedAdjacency normalized_adjacency(const SnapshotGraph& g) {
  if (g.empty()) throw ValidationError("normalized_adjacency of an empty graph");
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  Matrix a = g.weights() + Matrix::Identity(n, n);
  const Vector inv_sqrt_deg = a.rowwise().sum().array().rsqrt();
  // Outer product keeps the result exactly symmetric.
  return {a.cwiseProduct(inv_sqrt_deg * inv_sqrt_deg.transpose())};
}

/// Number of connected components (isolated nodes count as components).
inline std::size_t connected_components(const SnapshotGraph& g) {
  UnionFind uf(g.num_nodes());
  for (const auto& [u, v, w] : g.edges()) uf.unite(u, v);
  return uf.count_sets();
}

/// Planted partition graph with normally distributed cluster sizes.
///
/// Cluster sizes are drawn from N(size_mean, size_std^2), rounded, and clamped
/// to at least 2. Pairs inside a cluster are joined with probability p_in,
/// pairs across clusters with p_out, all at unit weight. Node ids are "0".."n-1"
/// and labels are cluster indices.
inline SnapshotGraph gaussian_partition_graph(int k, double size_mean, double size_std, double p_in,
                                              double p_out, std::uint64_t seed) {
  if (k < 2) throw ValidationError("gaussian_partition_graph needs k >= 2");
  if (!(size_mean >= 2.0) || !(size_std >= 0.0)) throw ValidationError("cluster size mean must be >= 2");
  if (!(p_out >= 0.0 && p_out <= p_in && p_in <= 1.0)) {
    throw ValidationError("probabilities must satisfy 0 <= p_out <= p_in <= 1");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> size_dist(size_mean, size_std);
  Labels labels;
  for (int c = 0; c < k; ++c) {
    const auto size = std::max<long>(2, std::lround(size_dist(rng)));
    labels.insert(labels.end(), static_cast<std::size_t>(size), c);
  }
  const auto n = static_cast<Eigen::Index>(labels.size());
  Matrix w = Matrix::Zero(n, n);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double p = labels[i] == labels[j] ? p_in : p_out;
      if (coin(rng) < p) w(i, j) = w(j, i) = 1.0;
    }
  }
  std::vector<std::string> ids;
  ids.reserve(labels.size());
  for (Eigen::Index i = 0; i < n; ++i) ids.push_back(std::to_string(i));
  return SnapshotGraph(std::move(ids), std::move(w), std::move(labels));
}

/// Copy of g where each absent pair (u in c1, v in c2) is added at unit weight
/// with probability p_add.
inline SnapshotGraph perturb_bridge(const SnapshotGraph& g, int c1, int c2, double p_add,
                                    std::uint64_t seed) {
  if (c1 == c2) throw ValidationError("perturb_bridge needs two distinct communities");
  if (!(p_add >= 0.0 && p_add <= 1.0)) throw ValidationError("p_add must be a probability");
  const Labels& labels = g.labels();
  const auto has = [&](int c) { return std::find(labels.begin(), labels.end(), c) != labels.end(); };
  if (!has(c1) || !has(c2)) throw ValidationError("perturb_bridge: unknown community label");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  Matrix w = g.weights();
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  for (Eigen::Index u = 0; u < n; ++u) {
    if (labels[u] != c1) continue;
    for (Eigen::Index v = 0; v < n; ++v) {
      if (labels[v] != c2 || w(u, v) > 0.0) continue;
      if (coin(rng) < p_add) w(u, v) = w(v, u) = 1.0;
    }
  }
  return SnapshotGraph(g.node_ids(), std::move(w), labels);
}

}  // namespace toporeg
