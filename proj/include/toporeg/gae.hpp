#pragma once

// Graph auto-encoder: one linear graph-convolution layer Z = Â X W and an
// inner-product decoder sigmoid(Z Z^T).

#include <toporeg/autodiff.hpp>
#include <toporeg/graph.hpp>

#include <fstream>
#include <string>

namespace toporeg {

inline constexpr Eigen::Index kDefaultEmbedDim = 30;

struct EncoderParams {
  Matrix weight;  // input_dim x embed_dim
};

inline EncoderParams init_encoder(Eigen::Index input_dim, Eigen::Index embed_dim, std::uint64_t seed) {
  return {glorot_init(input_dim, embed_dim, seed)};
}

/// Z = Â X W. `features` must be n x input_dim.
inline DiffMatrix encode(const DiffMatrix& a_hat, const DiffMatrix& features, const DiffMatrix& weight) {
  if (a_hat.rows() != a_hat.cols() || a_hat.cols() != features.rows() || features.cols() != weight.rows()) {
    throw ContractError("encode: dimension mismatch (Â " + detail::shape_string(a_hat.value()) + ", X " +
                        detail::shape_string(features.value()) + ", W " + detail::shape_string(weight.value()) +
                        ")");
  }
  return matmul(a_hat, matmul(features, weight));
}

/// Featureless graphs use one-hot node features, so Z = Â W.
inline DiffMatrix encode(const DiffMatrix& a_hat, const DiffMatrix& weight) {
  if (a_hat.rows() != a_hat.cols() || a_hat.cols() != weight.rows()) {
    throw ContractError("encode: identity features need an n x d weight, got " +
                        detail::shape_string(weight.value()) + " for n=" + std::to_string(a_hat.rows()));
  }
  return matmul(a_hat, weight);
}

/// sigmoid(Z Z^T), symmetric by construction.
inline DiffMatrix decode(const DiffMatrix& z) { return sigmoid(matmul(z, transpose(z))); }

/// Binarized adjacency (w > 0 -> 1) used as reconstruction target.
inline Matrix binary_adjacency(const SnapshotGraph& g) {
  return (g.weights().array() > 0.0).cast<double>().matrix();
}

/// Mean weighted binary cross-entropy between the binarized adjacency and
/// sigmoid(Z Z^T); positives are weighted by (n^2 - |pos|) / |pos|.
inline DiffMatrix reconstruction_loss(const SnapshotGraph& g, const DiffMatrix& z) {
  if (z.rows() != static_cast<Eigen::Index>(g.num_nodes())) {
    throw ContractError("reconstruction_loss: embedding rows do not match node count");
  }
  const Matrix target = binary_adjacency(g);
  const double positives = target.sum();
  if (positives == 0.0) throw DegenerateError("reconstruction_loss: graph has no edges");
  const double entries = static_cast<double>(target.size());
  return weighted_bce_loss(decode(z), target, (entries - positives) / positives);
}

/// "external_id v_1 ... v_d" per node.
inline void write_embedding(const std::string& path, const std::vector<std::string>& ids, const Matrix& z) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out.precision(17);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    out << ids.at(static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j < z.cols(); ++j) out << ' ' << z(i, j);
    out << '\n';
  }
}

}  // namespace toporeg
