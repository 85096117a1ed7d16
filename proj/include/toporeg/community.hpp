#pragma once

// Differentiable community-level network M = Q̂^T W Q̂ / sum_ij W_ij.

#include <toporeg/autodiff.hpp>
#include <toporeg/graph.hpp>
#include <toporeg/mfc.hpp>

#include <fstream>
#include <set>
#include <string>
#include <vector>

namespace toporeg {

struct FilteredAssignment {
  Labels pseudo_labels;  // s_i = argmax_k q_ik
  DiffMatrix q_hat;      // q_ik kept only where k == s_i
};

/// Keeps each row's argmax entry and zeroes the rest. The mask is a constant:
/// gradients reach Q only through the surviving entries.
inline FilteredAssignment filtered_assignment(const DiffMatrix& q) {
  FilteredAssignment out;
  out.pseudo_labels = hard_labels(q.value());
  Matrix mask = Matrix::Zero(q.rows(), q.cols());
  for (Eigen::Index i = 0; i < q.rows(); ++i) mask(i, out.pseudo_labels[i]) = 1.0;
  out.q_hat = hadamard(q, q.tape()->constant(std::move(mask)));
  return out;
}

struct CommunityNetwork {
  DiffMatrix m;                          // K x K
  std::vector<int> active_communities;   // communities with at least one node
};

inline std::vector<int> active_communities(const Labels& pseudo_labels, Eigen::Index k) {
  std::set<int> seen(pseudo_labels.begin(), pseudo_labels.end());
  std::vector<int> active;
  for (int c : seen) {
    if (c >= 0 && c < k) active.push_back(c);
  }
  return active;
}

/// M = Q̂^T W Q̂ / sum_ij W_ij (each undirected edge counted twice in the sum).
inline CommunityNetwork community_adjacency(const FilteredAssignment& filtered, const SnapshotGraph& g) {
  const DiffMatrix& q_hat = filtered.q_hat;
  if (q_hat.rows() != static_cast<Eigen::Index>(g.num_nodes())) {
    throw ContractError("community_adjacency: assignment rows do not match node count");
  }
  const double total = total_edge_weight(g);
  if (!(total > 0.0)) throw DegenerateError("community_adjacency: graph has zero total weight");
  Tape& tape = *q_hat.tape();
  const DiffMatrix w = tape.constant(g.weights());
  const DiffMatrix m = scale(matmul(transpose(q_hat), matmul(w, q_hat)), 1.0 / total);
  return {m, active_communities(filtered.pseudo_labels, q_hat.cols())};
}

/// Closed-form dL/dQ̂ = W Q̂ (G + G^T) / sum W for an upstream gradient G = dL/dM.
/// Equivalent to what the tape computes; kept for direct verification.
inline Matrix community_gradient(const Matrix& dl_dm, const Matrix& q_hat, const SnapshotGraph& g) {
  const double total = total_edge_weight(g);
  if (!(total > 0.0)) throw DegenerateError("community_gradient: graph has zero total weight");
  return g.weights() * q_hat * (dl_dm + dl_dm.transpose()) / total;
}

/// "K" then "k l weight" for the upper triangle (including the diagonal).
inline void write_community_network(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out.precision(17);
  out << m.rows() << '\n';
  for (Eigen::Index k = 0; k < m.rows(); ++k) {
    for (Eigen::Index l = k; l < m.cols(); ++l) out << k << ' ' << l << ' ' << m(k, l) << '\n';
  }
}

}  // namespace toporeg
