#pragma once

// Wasserstein distance between persistence diagrams, the sliding-window
// temporal loss over community-network diagrams, and its gradient with
// respect to community-network edge weights.

#include <toporeg/errors.hpp>
#include <toporeg/hungarian.hpp>
#include <toporeg/persistence.hpp>
#include <toporeg/types.hpp>

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace toporeg {

/// Points of a single homology dimension.
struct Diagram {
  int dim = 0;
  std::vector<DiagramPoint> points;
};

inline Diagram diagram_of(const PersistenceDiagram& dgm, int dim) { return {dim, dgm.points(dim)}; }

struct GroundMetric {
  double p = 1.0;                                         // transport exponent
  double q = std::numeric_limits<double>::infinity();     // point norm
};

/// One matched couple; -1 on either side means the diagonal.
struct MatchedPair {
  int first = -1;
  int second = -1;
};

struct DiagramMatching {
  std::vector<MatchedPair> pairs;
  double total_cost = 0.0;  // sum of ||x - gamma(x)||_q^p
};

struct WassersteinResult {
  double distance = 0.0;
  DiagramMatching matching;
};

namespace detail {

inline double point_distance(const DiagramPoint& x, const DiagramPoint& y, double q) {
  const double db = std::abs(x.birth - y.birth);
  const double dd = std::abs(x.death - y.death);
  if (std::isinf(q)) return std::max(db, dd);
  return std::pow(std::pow(db, q) + std::pow(dd, q), 1.0 / q);
}

// Distance to the orthogonal projection ((b+d)/2, (b+d)/2).
inline double diagonal_distance(const DiagramPoint& x, double q) {
  const double half = std::abs(x.death - x.birth) / 2.0;
  if (std::isinf(q)) return half;
  return half * std::pow(2.0, 1.0 / q);
}

}  // namespace detail

/// W_{p,q} via an exact assignment on the diagonal-augmented
/// (n1 + n2) x (n1 + n2) cost matrix. Diagonal slots are interchangeable, so
/// every D1 point may use any of the n1 diagonal columns.
inline WassersteinResult wasserstein_distance(const Diagram& d1, const Diagram& d2, const GroundMetric& metric = {}) {
  if (d1.dim != d2.dim) throw ContractError("wasserstein_distance: diagrams of different dimensions");
  if (!(metric.p >= 1.0) || !(metric.q >= 1.0)) throw ContractError("wasserstein_distance needs p, q >= 1");
  const auto n1 = static_cast<Eigen::Index>(d1.points.size());
  const auto n2 = static_cast<Eigen::Index>(d2.points.size());
  WassersteinResult result;
  if (n1 + n2 == 0) return result;
  const auto power = [&](double c) { return metric.p == 1.0 ? c : std::pow(c, metric.p); };

  Matrix cost = Matrix::Zero(n1 + n2, n1 + n2);
  for (Eigen::Index i = 0; i < n1; ++i) {
    for (Eigen::Index j = 0; j < n2; ++j) {
      cost(i, j) = power(detail::point_distance(d1.points[i], d2.points[j], metric.q));
    }
    cost.block(i, n2, 1, n1).setConstant(power(detail::diagonal_distance(d1.points[i], metric.q)));
  }
  for (Eigen::Index j = 0; j < n2; ++j) {
    cost.block(n1, j, n2, 1).setConstant(power(detail::diagonal_distance(d2.points[j], metric.q)));
  }
  const auto assignment = hungarian_assignment(cost);

  std::vector<char> second_used(static_cast<std::size_t>(n2), 0);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n1 + n2; ++i) {
    const int col = assignment[static_cast<std::size_t>(i)];
    total += cost(i, col);
    if (i < n1) {
      if (col < n2) {
        result.matching.pairs.push_back({static_cast<int>(i), col});
        second_used[col] = 1;
      } else {
        result.matching.pairs.push_back({static_cast<int>(i), -1});
      }
    }
  }
  for (Eigen::Index j = 0; j < n2; ++j) {
    if (!second_used[j]) result.matching.pairs.push_back({-1, static_cast<int>(j)});
  }
  result.matching.total_cost = total;
  result.distance = metric.p == 1.0 ? total : std::pow(total, 1.0 / metric.p);
  return result;
}

/// Cost of a fixed matching, sum ||x - gamma(x)||_q^p (not raised to 1/p).
inline double matching_cost(const Diagram& d1, const Diagram& d2, const DiagramMatching& matching,
                            const GroundMetric& metric = {}) {
  double total = 0.0;
  for (const auto& m : matching.pairs) {
    double c = 0.0;
    if (m.first >= 0 && m.second >= 0) {
      c = detail::point_distance(d1.points.at(m.first), d2.points.at(m.second), metric.q);
    } else if (m.first >= 0) {
      c = detail::diagonal_distance(d1.points.at(m.first), metric.q);
    } else {
      c = detail::diagonal_distance(d2.points.at(m.second), metric.q);
    }
    total += metric.p == 1.0 ? c : std::pow(c, metric.p);
  }
  return total;
}

/// d W / d(birth, death) of every point of d1 under a frozen matching.
inline std::vector<std::array<double, 2>> wasserstein_point_gradient(const Diagram& d1, const Diagram& d2,
                                                                     const WassersteinResult& w,
                                                                     const GroundMetric& metric = {}) {
  std::vector<std::array<double, 2>> grad(d1.points.size(), {0.0, 0.0});
  if (w.matching.total_cost <= 0.0 && metric.p != 1.0) return grad;
  // dW/dcost_i = (1/p) S^{1/p - 1} p c^{p-1} = (c / W)^{p-1}
  const auto outer = [&](double c) {
    if (metric.p == 1.0) return 1.0;
    return std::pow(c / w.distance, metric.p - 1.0);
  };
  const auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
  for (const auto& m : w.matching.pairs) {
    if (m.first < 0) continue;
    const DiagramPoint& x = d1.points[m.first];
    std::array<double, 2>& g = grad[m.first];
    if (m.second >= 0) {
      const DiagramPoint& y = d2.points[m.second];
      const double db = x.birth - y.birth;
      const double dd = x.death - y.death;
      const double c = detail::point_distance(x, y, metric.q);
      if (c == 0.0) continue;
      const double scale = outer(c);
      if (std::isinf(metric.q)) {
        if (std::abs(db) > std::abs(dd)) {
          g[0] += scale * sign(db);
        } else if (std::abs(dd) > std::abs(db)) {
          g[1] += scale * sign(dd);
        } else {
          g[0] += 0.5 * scale * sign(db);
          g[1] += 0.5 * scale * sign(dd);
        }
      } else {
        const double denom = std::pow(c, metric.q - 1.0);
        g[0] += scale * sign(db) * std::pow(std::abs(db), metric.q - 1.0) / denom;
        g[1] += scale * sign(dd) * std::pow(std::abs(dd), metric.q - 1.0) / denom;
      }
    } else {
      const double c = detail::diagonal_distance(x, metric.q);
      if (c == 0.0) continue;
      const double factor = outer(c) * (std::isinf(metric.q) ? 0.5 : 0.5 * std::pow(2.0, 1.0 / metric.q));
      const double s = sign(x.death - x.birth);
      g[0] -= factor * s;
      g[1] += factor * s;
    }
  }
  return grad;
}

/// Filtration, diagram and inverse map of one community network.
struct SnapshotTopology {
  Filtration filtration;
  PersistenceDiagram diagram;
  std::vector<InverseMapEntry> inverse;
  Eigen::Index communities = 0;
};

inline SnapshotTopology snapshot_topology(const Matrix& m, const std::vector<int>& active) {
  SnapshotTopology topo;
  topo.filtration = wrcf_filtration(m, active);
  topo.diagram = compute_persistence(topo.filtration);
  topo.inverse = inverse_map(topo.filtration, topo.diagram);
  topo.communities = m.rows();
  return topo;
}

/// Diagram dimensions entering the loss (H0 and H1).
inline constexpr std::array<int, 2> kLossDimensions{0, 1};

struct TopoTerm {
  int t = 0;
  int dim = 0;
  double w_prev = 0.0;
  double w_next = 0.0;
  double term() const noexcept { return w_prev + w_next; }
};

struct TopoLossReport {
  std::vector<TopoTerm> terms;
  double loss = 0.0;
  std::optional<std::string> warning;
};

/// L_topo = sum_{t=1}^{T-1} sum_k [W(dgm_k(t), dgm_k(t-1)) + W(dgm_k(t), dgm_k(t+1))]
/// over snapshots 0..T.
inline TopoLossReport topo_loss(const std::vector<PersistenceDiagram>& diagrams, const GroundMetric& metric = {}) {
  TopoLossReport report;
  if (diagrams.size() < 3) {
    report.warning = "topological loss needs at least three snapshots (T >= 2); returning 0";
    return report;
  }
  for (std::size_t t = 1; t + 1 < diagrams.size(); ++t) {
    for (int dim : kLossDimensions) {
      const Diagram here = diagram_of(diagrams[t], dim);
      TopoTerm term{static_cast<int>(t), dim};
      term.w_prev = wasserstein_distance(here, diagram_of(diagrams[t - 1], dim), metric).distance;
      term.w_next = wasserstein_distance(here, diagram_of(diagrams[t + 1], dim), metric).distance;
      report.loss += term.term();
      report.terms.push_back(term);
    }
  }
  return report;
}

/// A loss term comparing the current snapshot's diagram (first argument)
/// against a frozen neighbor, with its optimal matching.
struct FrozenTerm {
  Diagram current;
  Diagram target;
  WassersteinResult result;
};

/// Terms of L_topo whose first argument is snapshot t, with neighbors frozen.
inline std::vector<FrozenTerm> local_terms(const SnapshotTopology& current,
                                           const std::vector<const PersistenceDiagram*>& neighbors,
                                           const GroundMetric& metric = {}) {
  std::vector<FrozenTerm> terms;
  for (int dim : kLossDimensions) {
    for (const PersistenceDiagram* neighbor : neighbors) {
      FrozenTerm term{diagram_of(current.diagram, dim), diagram_of(*neighbor, dim), {}};
      term.result = wasserstein_distance(term.current, term.target, metric);
      terms.push_back(std::move(term));
    }
  }
  return terms;
}

/// dL/dM for the given terms: each point's birth/death gradient lands on the
/// community edge the inverse map assigns to it (coordinate = 1 - M_uv, so
/// the sign flips). Only upper-triangle entries (u < v) are filled.
inline Matrix topo_gradient(const SnapshotTopology& current, const std::vector<FrozenTerm>& terms,
                            const GroundMetric& metric = {}) {
  Matrix grad = Matrix::Zero(current.communities, current.communities);
  for (const auto& term : terms) {
    const auto point_grads = wasserstein_point_gradient(term.current, term.target, term.result, metric);
    for (std::size_t i = 0; i < point_grads.size(); ++i) {
      const int pair = term.current.points[i].pair;
      const InverseMapEntry& inv = current.inverse.at(static_cast<std::size_t>(pair));
      const bool essential = current.diagram.pairs[static_cast<std::size_t>(pair)].essential();
      if (inv.birth_edge) grad(inv.birth_edge->first, inv.birth_edge->second) -= point_grads[i][0];
      if (inv.death_edge && !essential) grad(inv.death_edge->first, inv.death_edge->second) -= point_grads[i][1];
    }
  }
  return grad;
}

/// Sum of term distances with matchings and pairings held fixed, re-reading
/// every attributed coordinate from the community network `m`.
inline double frozen_topo_loss(const Matrix& m, const SnapshotTopology& current, const std::vector<FrozenTerm>& terms,
                               const GroundMetric& metric = {}) {
  double total = 0.0;
  for (const auto& term : terms) {
    Diagram moved = term.current;
    for (auto& point : moved.points) {
      const InverseMapEntry& inv = current.inverse.at(static_cast<std::size_t>(point.pair));
      const bool essential = current.diagram.pairs[static_cast<std::size_t>(point.pair)].essential();
      if (inv.birth_edge) point.birth = 1.0 - m(inv.birth_edge->first, inv.birth_edge->second);
      if (inv.death_edge && !essential) point.death = 1.0 - m(inv.death_edge->first, inv.death_edge->second);
    }
    const double cost = matching_cost(moved, term.target, term.result.matching, metric);
    total += metric.p == 1.0 ? cost : std::pow(cost, 1.0 / metric.p);
  }
  return total;
}

inline double terms_value(const std::vector<FrozenTerm>& terms) {
  double total = 0.0;
  for (const auto& term : terms) total += term.result.distance;
  return total;
}

}  // namespace toporeg
