#pragma once

// Matrix factorization clustering on top of the graph auto-encoder.
//
// Soft assignments come from Q = g(Z C^+), g the per-row min-max
// normalization, and the clustering loss is MSE(Z, Q C). The encoder weight
// and the centers C are trained jointly on L_gae + alpha * L_c.

#include <toporeg/autodiff.hpp>
#include <toporeg/gae.hpp>
#include <toporeg/graph.hpp>
#include <toporeg/metrics.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace toporeg {

inline constexpr double kDefaultPinvDamping = 1e-6;

/// Q = row_minmax(Z * pinv(C)).
inline DiffMatrix compute_assignment(const DiffMatrix& z, const DiffMatrix& centers, double lambda) {
  if (z.cols() != centers.cols()) throw ContractError("compute_assignment: embedding and centers differ in width");
  return row_minmax_normalize(matmul(z, regularized_pinv(centers, lambda)));
}

/// MSE(Z, Q C).
inline DiffMatrix clustering_loss(const DiffMatrix& z, const DiffMatrix& q, const DiffMatrix& centers) {
  return mse_loss(z, matmul(q, centers));
}

/// Row argmax, lowest column index on ties.
inline Labels hard_labels(const Matrix& q) {
  Labels labels(static_cast<std::size_t>(q.rows()), 0);
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < q.cols(); ++j) {
      if (q(i, j) > q(i, best)) best = j;
    }
    labels[i] = static_cast<int>(best);
  }
  return labels;
}

struct MfcConfig {
  int clusters = 5;
  Eigen::Index embed_dim = kDefaultEmbedDim;
  double alpha = 10.0;
  int epochs = 500;
  /// Leading epochs that optimize L_gae alone before centers are initialized.
  int warmup_epochs = 200;
  double learning_rate = 0.001;
  double lambda = kDefaultPinvDamping;
  std::uint64_t seed = 0;
  /// Stop when the relative change of the total loss over `patience` epochs
  /// falls below this value.
  double tolerance = 1e-6;
  int patience = 10;
};

struct LossRecord {
  int epoch = 0;
  double gae = 0.0;
  double clustering = 0.0;
  double topo = 0.0;
  double total = 0.0;
};

/// Values of one forward pass through encoder and clustering head.
struct ForwardPass {
  DiffMatrix weight;
  DiffMatrix centers;
  DiffMatrix z;
  DiffMatrix q;
  DiffMatrix gae_loss;
  DiffMatrix clustering_loss;
};

/// Trainable state of one snapshot: encoder weight, centers and optimizer.
class SnapshotModel {
 public:
  SnapshotModel(const SnapshotGraph& graph, const MfcConfig& config)
      : graph_(&graph),
        config_(config),
        a_hat_(normalized_adjacency(graph).matrix),
        encoder_(init_encoder(static_cast<Eigen::Index>(graph.num_nodes()), config.embed_dim, config.seed)),
        encoder_optimizer_(AdamConfig{config.learning_rate}),
        center_optimizer_(AdamConfig{config.learning_rate}) {
    if (config.clusters < 2) throw ValidationError("MFC needs at least two clusters");
    if (config.embed_dim < config.clusters) {
      throw RankError("MFC fails when the embedding dimension (" + std::to_string(config.embed_dim) +
                      ") is smaller than the number of clusters (" + std::to_string(config.clusters) + ")");
    }
    if (static_cast<std::size_t>(config.clusters) > graph.num_nodes()) {
      throw ValidationError("more clusters than nodes");
    }
  }

  const SnapshotGraph& graph() const noexcept { return *graph_; }
  const MfcConfig& config() const noexcept { return config_; }
  const Matrix& a_hat() const noexcept { return a_hat_; }
  const EncoderParams& encoder() const noexcept { return encoder_; }
  const Matrix& centers() const noexcept { return centers_; }
  bool has_centers() const noexcept { return centers_.size() > 0; }

  void set_parameters(EncoderParams encoder, Matrix centers) {
    if (encoder.weight.rows() != a_hat_.rows()) throw ContractError("encoder weight does not match node count");
    if (centers.rows() != config_.clusters || centers.cols() != encoder.weight.cols()) {
      throw ContractError("centers have the wrong shape");
    }
    encoder_ = std::move(encoder);
    centers_ = std::move(centers);
  }

  /// Restarts the Adam moments (used when switching training stages).
  void reset_optimizer(double learning_rate) {
    encoder_optimizer_ = OptimizerState(AdamConfig{learning_rate});
    center_optimizer_ = OptimizerState(AdamConfig{learning_rate});
  }

  /// Z for the current encoder weight (no tape).
  Matrix embedding() const { return a_hat_ * encoder_.weight; }

  /// Centers from k-means (k-means++ seeding) on the current embedding.
  void init_centers() { centers_ = kmeans(embedding(), config_.clusters, config_.seed).centers; }

  /// Records encoder + (when centers exist) clustering head on `tape`.
  ForwardPass forward(Tape& tape) const {
    ForwardPass pass;
    pass.weight = tape.parameter(encoder_.weight);
    pass.z = encode(tape.constant(a_hat_), pass.weight);
    pass.gae_loss = reconstruction_loss(*graph_, pass.z);
    if (has_centers()) {
      pass.centers = tape.parameter(centers_);
      pass.q = compute_assignment(pass.z, pass.centers, config_.lambda);
      pass.clustering_loss = clustering_loss(pass.z, pass.q, pass.centers);
    }
    return pass;
  }

  /// Adam step on encoder weight (and centers when present) after backward().
  void apply_gradients(const ForwardPass& pass) {
    encoder_optimizer_.step({&encoder_.weight}, {pass.weight.grad()});
    if (pass.centers.valid()) center_optimizer_.step({&centers_}, {pass.centers.grad()});
  }

  /// Current soft assignment Q (no tape).
  Matrix assignment() const {
    Tape tape;
    return compute_assignment(tape.constant(embedding()), tape.constant(centers_), config_.lambda).value();
  }

 private:
  const SnapshotGraph* graph_;
  MfcConfig config_;
  Matrix a_hat_;
  EncoderParams encoder_;
  Matrix centers_;
  OptimizerState encoder_optimizer_;
  OptimizerState center_optimizer_;
};

namespace detail {

inline bool converged(const std::vector<LossRecord>& trace, double tolerance, int patience) {
  if (patience <= 0 || trace.size() <= static_cast<std::size_t>(patience)) return false;
  const double now = trace.back().total;
  const double then = trace[trace.size() - 1 - static_cast<std::size_t>(patience)].total;
  return std::abs(now - then) <= tolerance * std::max(std::abs(then), 1e-300);
}

inline void check_finite_loss(double value, int epoch) {
  if (!std::isfinite(value)) throw NumericError("training diverged at epoch " + std::to_string(epoch));
}

}  // namespace detail

struct MfcResult {
  Matrix assignment;  // Q, n x K
  Matrix centers;     // C, K x d
  EncoderParams encoder;
  Matrix embedding;   // Z, n x d
  std::vector<LossRecord> trace;
};

/// Runs GAE warm-up followed by joint L_gae + alpha * L_c training on a model.
/// Returns the loss trace; the model holds the trained parameters.
inline std::vector<LossRecord> train_mfc(SnapshotModel& model) {
  const MfcConfig& cfg = model.config();
  std::vector<LossRecord> trace;
  const int warmup = std::min(cfg.warmup_epochs, cfg.epochs);
  for (int epoch = 0; epoch < warmup; ++epoch) {
    Tape tape;
    const ForwardPass pass = model.forward(tape);
    try {
      tape.backward(pass.gae_loss);
      model.apply_gradients(pass);
    } catch (const NumericError& e) {
      throw NumericError("GAE warm-up epoch " + std::to_string(epoch) + ": " + e.what());
    }
    const double loss = pass.gae_loss.item();
    detail::check_finite_loss(loss, epoch);
    trace.push_back({epoch, loss, 0.0, 0.0, loss});
  }
  if (!model.has_centers()) model.init_centers();
  std::vector<LossRecord> joint;
  for (int epoch = warmup; epoch < cfg.epochs; ++epoch) {
    Tape tape;
    ForwardPass pass;
    try {
      pass = model.forward(tape);
      const DiffMatrix total = add(pass.gae_loss, scale(pass.clustering_loss, cfg.alpha));
      tape.backward(total);
      model.apply_gradients(pass);
    } catch (const NumericError& e) {
      throw NumericError("MFC epoch " + std::to_string(epoch) + ": " + e.what());
    }
    const double gae = pass.gae_loss.item();
    const double lc = pass.clustering_loss.item();
    const LossRecord record{epoch, gae, lc, 0.0, gae + cfg.alpha * lc};
    detail::check_finite_loss(record.total, epoch);
    trace.push_back(record);
    joint.push_back(record);
    if (detail::converged(joint, cfg.tolerance, cfg.patience)) break;
  }
  return trace;
}

/// Trains MFC on a single snapshot from scratch.
inline MfcResult train_mfc(const SnapshotGraph& g, const MfcConfig& config) {
  SnapshotModel model(g, config);
  MfcResult result;
  result.trace = train_mfc(model);
  result.assignment = model.assignment();
  result.centers = model.centers();
  result.encoder = model.encoder();
  result.embedding = model.embedding();
  return result;
}

}  // namespace toporeg
