#pragma once

// Clustering evaluation: ACC, NMI, ARI, weighted modularity, and the seeded
// k-means used in fixed-K evaluation.

#include <toporeg/errors.hpp>
#include <toporeg/graph.hpp>
#include <toporeg/hungarian.hpp>
#include <toporeg/types.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <vector>

namespace toporeg {

/// Co-occurrence counts of true (rows) vs predicted (columns) labels.
struct ContingencyTable {
  Matrix counts;
  Vector true_marginals;
  Vector pred_marginals;
  double total = 0.0;
};

inline ContingencyTable contingency_table(const Labels& truth, const Labels& pred) {
  if (truth.size() != pred.size()) throw ContractError("metric: label vectors differ in length");
  if (truth.empty()) throw ContractError("metric: empty label vectors");
  std::map<int, int> true_index, pred_index;
  for (int t : truth) true_index.emplace(t, 0);
  for (int p : pred) pred_index.emplace(p, 0);
  int next = 0;
  for (auto& [label, idx] : true_index) idx = next++;
  next = 0;
  for (auto& [label, idx] : pred_index) idx = next++;

  ContingencyTable table;
  table.counts = Matrix::Zero(static_cast<Eigen::Index>(true_index.size()),
                              static_cast<Eigen::Index>(pred_index.size()));
  for (std::size_t i = 0; i < truth.size(); ++i) table.counts(true_index[truth[i]], pred_index[pred[i]]) += 1.0;
  table.true_marginals = table.counts.rowwise().sum();
  table.pred_marginals = table.counts.colwise().sum().transpose();
  table.total = static_cast<double>(truth.size());
  return table;
}

/// Best matched fraction over one-to-one maps between predicted and true labels.
inline double accuracy(const Labels& truth, const Labels& pred) {
  const ContingencyTable table = contingency_table(truth, pred);
  const auto size = std::max(table.counts.rows(), table.counts.cols());
  Matrix cost = Matrix::Zero(size, size);
  cost.topLeftCorner(table.counts.rows(), table.counts.cols()) = -table.counts;
  const auto assignment = hungarian_assignment(cost);
  double matched = 0.0;
  for (Eigen::Index r = 0; r < table.counts.rows(); ++r) {
    const int c = assignment[static_cast<std::size_t>(r)];
    if (c >= 0 && c < table.counts.cols()) matched += table.counts(r, c);
  }
  return matched / table.total;
}

namespace detail {

inline double entropy(const Vector& marginals, double total) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < marginals.size(); ++i) {
    if (marginals(i) > 0.0) {
      const double p = marginals(i) / total;
      h -= p * std::log(p);
    }
  }
  return h;
}

inline double choose2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace detail

/// Mutual information normalized by the arithmetic mean of the two entropies.
/// Returns 0 when either partition has a single cluster (unless both do and
/// they are identical, which returns 1).
inline double nmi(const Labels& truth, const Labels& pred) {
  const ContingencyTable table = contingency_table(truth, pred);
  const double h_true = detail::entropy(table.true_marginals, table.total);
  const double h_pred = detail::entropy(table.pred_marginals, table.total);
  if (table.counts.rows() == 1 && table.counts.cols() == 1) return 1.0;
  if (h_true == 0.0 || h_pred == 0.0) return 0.0;
  double mi = 0.0;
  for (Eigen::Index r = 0; r < table.counts.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.counts.cols(); ++c) {
      const double n_rc = table.counts(r, c);
      if (n_rc == 0.0) continue;
      mi += n_rc / table.total *
            std::log(n_rc * table.total / (table.true_marginals(r) * table.pred_marginals(c)));
    }
  }
  return std::clamp(mi / (0.5 * (h_true + h_pred)), 0.0, 1.0);
}

/// Adjusted Rand index (pair counting, adjusted for chance).
inline double ari(const Labels& truth, const Labels& pred) {
  if (truth.size() < 2) throw ContractError("ari needs at least two nodes");
  const ContingencyTable table = contingency_table(truth, pred);
  double sum_cells = 0.0;
  for (Eigen::Index r = 0; r < table.counts.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.counts.cols(); ++c) sum_cells += detail::choose2(table.counts(r, c));
  }
  double sum_true = 0.0, sum_pred = 0.0;
  for (Eigen::Index r = 0; r < table.true_marginals.size(); ++r) sum_true += detail::choose2(table.true_marginals(r));
  for (Eigen::Index c = 0; c < table.pred_marginals.size(); ++c) sum_pred += detail::choose2(table.pred_marginals(c));
  const double expected = sum_true * sum_pred / detail::choose2(table.total);
  const double max_index = 0.5 * (sum_true + sum_pred);
  if (max_index == expected) return 1.0;
  return (sum_cells - expected) / (max_index - expected);
}

/// Weighted Newman modularity, sum_c [in_c / 2m - (deg_c / 2m)^2] with
/// 2m = sum_ij W_ij.
inline double modularity(const SnapshotGraph& g, const Labels& labels) {
  if (labels.size() != g.num_nodes()) throw ContractError("modularity: labels do not cover the graph");
  const double two_m = total_edge_weight(g);
  if (!(two_m > 0.0)) throw DegenerateError("modularity of a graph with zero total weight");
  std::map<int, std::pair<double, double>> per_community;  // (internal, degree)
  const Matrix& w = g.weights();
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    auto& [internal, degree] = per_community[labels[i]];
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      degree += w(i, j);
      if (labels[j] == labels[i]) internal += w(i, j);
    }
  }
  double q = 0.0;
  for (const auto& [label, stats] : per_community) {
    q += stats.first / two_m - (stats.second / two_m) * (stats.second / two_m);
  }
  return q;
}

struct KMeansResult {
  Labels labels;
  Matrix centers;
  double inertia = 0.0;
};

struct KMeansOptions {
  int max_iterations = 300;
  double tolerance = 1e-6;
  int restarts = 10;
};

namespace detail {

inline Matrix kmeanspp_seed(const Matrix& points, int k, std::mt19937_64& rng) {
  const auto n = points.rows();
  Matrix centers(k, points.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centers.row(0) = points.row(pick(rng));
  Vector closest = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int c = 1; c < k; ++c) {
    const double total = closest.sum();
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      double target = unit(rng) * total;
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= closest(i);
        if (target < 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centers.row(c) = points.row(chosen);
    closest = closest.cwiseMin((points.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  return centers;
}

inline KMeansResult lloyd(const Matrix& points, Matrix centers, const KMeansOptions& options) {
  const auto n = points.rows();
  const auto k = centers.rows();
  const double feature_variance =
      (points.rowwise() - points.colwise().mean()).colwise().squaredNorm().mean() / static_cast<double>(n);
  const double tol = options.tolerance * feature_variance;
  KMeansResult result;
  result.labels.assign(static_cast<std::size_t>(n), 0);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      (centers.rowwise() - points.row(i)).rowwise().squaredNorm().minCoeff(&best);
      result.labels[i] = static_cast<int>(best);
    }
    Matrix updated = Matrix::Zero(k, points.cols());
    Vector counts = Vector::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      updated.row(result.labels[i]) += points.row(i);
      counts(result.labels[i]) += 1.0;
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts(c) > 0.0) {
        updated.row(c) /= counts(c);
      } else {
        // Empty cluster: move it onto the point farthest from its center.
        Eigen::Index far = 0;
        Vector dist(n);
        for (Eigen::Index i = 0; i < n; ++i) dist(i) = (points.row(i) - centers.row(result.labels[i])).squaredNorm();
        dist.maxCoeff(&far);
        updated.row(c) = points.row(far);
      }
    }
    const double shift = (updated - centers).squaredNorm();
    centers = std::move(updated);
    if (shift <= tol) break;
  }
  result.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    result.inertia += (centers.rowwise() - points.row(i)).rowwise().squaredNorm().minCoeff(&best);
    result.labels[i] = static_cast<int>(best);
  }
  result.centers = std::move(centers);
  return result;
}

}  // namespace detail

/// Lloyd's k-means with k-means++ seeding; best of `restarts` runs by inertia.
inline KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, const KMeansOptions& options = {}) {
  if (k < 1) throw ContractError("kmeans needs k >= 1");
  if (points.rows() < k) throw ContractError("kmeans needs at least k points");
  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    KMeansResult run = detail::lloyd(points, detail::kmeanspp_seed(points, k, rng), options);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

}  // namespace toporeg
