#pragma once

// End-to-end training: per-snapshot GAE + MFC (stage 1), then topological
// regularization sweeps over interior snapshots (stage 2), evaluation and the
// consistency report.

#include <toporeg/community.hpp>
#include <toporeg/errors.hpp>
#include <toporeg/gae.hpp>
#include <toporeg/graph.hpp>
#include <toporeg/metrics.hpp>
#include <toporeg/mfc.hpp>
#include <toporeg/persistence.hpp>
#include <toporeg/topo_loss.hpp>

#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <future>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace toporeg {

enum class EvalMode {
  kFixed,    // k-means on the embedding with the configured K
  kVarying,  // argmax of the assignment with K = 2 x expected communities
};

struct PipelineConfig {
  int clusters = 5;
  Eigen::Index embed_dim = kDefaultEmbedDim;
  double lr = 0.001;
  int epochs_stage1 = 500;
  int epochs_stage2 = 500;
  int warmup_epochs = 200;
  double alpha_stage1 = 10.0;
  double beta_stage1 = 0.0;
  double alpha_stage2 = 1.0;
  double beta_stage2 = 10.0;
  double lambda_pinv = kDefaultPinvDamping;
  std::uint64_t seed = 0;
  EvalMode mode = EvalMode::kFixed;
  /// Worker threads for per-snapshot work; 0 picks the hardware concurrency.
  unsigned threads = 0;

  /// Number of columns of the assignment matrix.
  int model_clusters() const noexcept { return mode == EvalMode::kVarying ? 2 * clusters : clusters; }

  void validate() const {
    if (clusters < 2) throw ValidationError("config: K must be >= 2");
    if (embed_dim < model_clusters()) {
      throw RankError("config: embed_dim (" + std::to_string(embed_dim) + ") must be >= K (" +
                      std::to_string(model_clusters()) + ")");
    }
    if (epochs_stage1 < 0 || epochs_stage2 < 0 || warmup_epochs < 0) {
      throw ValidationError("config: epoch counts must be non-negative");
    }
    if (alpha_stage1 < 0 || beta_stage1 < 0 || alpha_stage2 < 0 || beta_stage2 < 0) {
      throw ValidationError("config: alpha and beta must be non-negative");
    }
    if (!(lr > 0.0)) throw ValidationError("config: learning rate must be positive");
    if (lambda_pinv < 0.0) throw ValidationError("config: lambda_pinv must be non-negative");
  }

  MfcConfig mfc(std::size_t t) const {
    MfcConfig m;
    m.clusters = model_clusters();
    m.embed_dim = embed_dim;
    m.alpha = alpha_stage1;
    m.epochs = epochs_stage1;
    m.warmup_epochs = warmup_epochs;
    m.learning_rate = lr;
    m.lambda = lambda_pinv;
    m.seed = snapshot_seed(t);
    return m;
  }

  std::uint64_t snapshot_seed(std::size_t t) const noexcept { return seed * 1000003ULL + t; }
};

/// Derived quantities of one trained snapshot model.
struct SnapshotState {
  EncoderParams encoder;
  Matrix centers;
  Matrix embedding;   // Z
  Matrix assignment;  // Q
  Matrix community;   // M
  Labels pseudo_labels;
  SnapshotTopology topology;
};

struct LossRow {
  int stage = 1;
  std::size_t t = 0;
  LossRecord record;
};

struct RunResult {
  std::vector<SnapshotState> stage1;
  std::vector<SnapshotState> stage2;  // empty until stage 2 ran
  std::vector<LossRow> losses;
  /// Per-epoch stage-2 L_topo over all snapshots (value at the start of each epoch).
  std::vector<double> topo_trace;

  const std::vector<SnapshotState>& final_states() const { return stage2.empty() ? stage1 : stage2; }
};

/// M from the assignment: rows are rescaled to sum to one before the argmax
/// filter so that the retained entry still depends on the other columns.
struct CommunityForward {
  FilteredAssignment filtered;
  CommunityNetwork network;
};

inline CommunityForward community_forward(const DiffMatrix& q, const SnapshotGraph& g) {
  CommunityForward out;
  out.filtered = filtered_assignment(row_sum_normalize(q));
  out.network = community_adjacency(out.filtered, g);
  return out;
}

inline SnapshotState make_state(const SnapshotGraph& g, const MfcConfig& cfg, EncoderParams encoder,
                                Matrix centers) {
  SnapshotState s;
  s.encoder = std::move(encoder);
  s.centers = std::move(centers);
  s.embedding = normalized_adjacency(g).matrix * s.encoder.weight;
  Tape tape;
  const DiffMatrix q = compute_assignment(tape.constant(s.embedding), tape.constant(s.centers), cfg.lambda);
  s.assignment = q.value();
  const CommunityForward cf = community_forward(q, g);
  s.community = cf.network.m.value();
  s.pseudo_labels = cf.filtered.pseudo_labels;
  s.topology = snapshot_topology(s.community, cf.network.active_communities);
  return s;
}

namespace detail {

// Runs job(t) for t in [0, count), in parallel when threads > 1. Exceptions are
// rethrown with the snapshot index attached.
inline void for_each_snapshot(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& job) {
  const auto wrap = [&](std::size_t t) {
    try {
      job(t);
    } catch (const std::exception& e) {
      throw Error("snapshot " + std::to_string(t) + ": " + e.what());
    }
  };
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  if (threads <= 1 || count <= 1) {
    for (std::size_t t = 0; t < count; ++t) wrap(t);
    return;
  }
  std::vector<std::future<void>> pending;
  for (std::size_t t = 0; t < count; ++t) {
    pending.push_back(std::async(std::launch::async, wrap, t));
    if (pending.size() >= threads) {
      pending.front().get();
      pending.erase(pending.begin());
    }
  }
  for (auto& f : pending) f.get();
}

}  // namespace detail

/// Stage 1: independent GAE warm-up + MFC training for every snapshot.
inline RunResult stage1_train(const DynamicGraph& dg, const PipelineConfig& cfg) {
  cfg.validate();
  RunResult result;
  result.stage1.resize(dg.size());
  std::vector<std::vector<LossRecord>> traces(dg.size());
  detail::for_each_snapshot(dg.size(), cfg.threads, [&](std::size_t t) {
    const MfcConfig mcfg = cfg.mfc(t);
    SnapshotModel model(dg[t], mcfg);
    traces[t] = train_mfc(model);
    result.stage1[t] = make_state(dg[t], mcfg, model.encoder(), model.centers());
  });
  for (std::size_t t = 0; t < dg.size(); ++t) {
    for (const auto& r : traces[t]) result.losses.push_back({1, t, r});
  }
  return result;
}

/// Called after every stage-2 epoch with the epoch index and current states.
using EpochObserver = std::function<void(int epoch, const std::vector<SnapshotState>&)>;

/// Stage 2: per epoch, recompute every community network and diagram, then
/// sweep t = 1..T-1 minimizing L_gae + alpha L_c + beta (topological terms of
/// t) with the neighbors' diagrams frozen. Snapshots 0 and T keep training on
/// L_gae + alpha L_c.
inline RunResult stage2_train(RunResult result, const DynamicGraph& dg, const PipelineConfig& cfg,
                              const EpochObserver& observer = {}) {
  cfg.validate();
  if (result.stage1.size() != dg.size()) throw MissingArtifactError("stage 2 needs a stage-1 result per snapshot");
  if (dg.steps() < 2) {
    std::cerr << "warning: stage 2 needs at least three snapshots; skipping topological regularization\n";
    result.stage2 = result.stage1;
    return result;
  }

  std::vector<MfcConfig> configs;
  std::vector<SnapshotModel> models;
  configs.reserve(dg.size());
  models.reserve(dg.size());
  for (std::size_t t = 0; t < dg.size(); ++t) {
    MfcConfig mcfg = cfg.mfc(t);
    mcfg.alpha = cfg.alpha_stage2;
    configs.push_back(mcfg);
    models.emplace_back(dg[t], mcfg);
    models.back().set_parameters(result.stage1[t].encoder, result.stage1[t].centers);
  }

  std::vector<SnapshotState> states = result.stage1;
  const GroundMetric metric;
  for (int epoch = 0; epoch < cfg.epochs_stage2; ++epoch) {
    std::vector<PersistenceDiagram> frozen(dg.size());
    for (std::size_t t = 0; t < dg.size(); ++t) frozen[t] = states[t].topology.diagram;
    result.topo_trace.push_back(topo_loss(frozen, metric).loss);

    for (std::size_t t = 0; t < dg.size(); ++t) {
      SnapshotModel& model = models[t];
      const bool interior = t >= 1 && t + 1 < dg.size();
      Tape tape;
      const ForwardPass pass = model.forward(tape);
      DiffMatrix total = add(pass.gae_loss, scale(pass.clustering_loss, cfg.alpha_stage2));
      double topo_value = 0.0;
      if (interior && cfg.beta_stage2 > 0.0) {
        const CommunityForward cf = community_forward(pass.q, dg[t]);
        const SnapshotTopology topo = snapshot_topology(cf.network.m.value(), cf.network.active_communities);
        const auto terms = local_terms(topo, {&frozen[t - 1], &frozen[t + 1]}, metric);
        topo_value = terms_value(terms);
        const Matrix grad_m = topo_gradient(topo, terms, metric);
        total = add(total, scale(frobenius_dot(cf.network.m, grad_m), cfg.beta_stage2));
      }
      try {
        tape.backward(total);
        model.apply_gradients(pass);
      } catch (const NumericError& e) {
        throw NumericError("stage 2 epoch " + std::to_string(epoch) + ", snapshot " + std::to_string(t) + ": " +
                           e.what());
      }
      const double gae = pass.gae_loss.item();
      const double lc = pass.clustering_loss.item();
      const LossRecord record{epoch, gae, lc, topo_value,
                              gae + cfg.alpha_stage2 * lc + cfg.beta_stage2 * topo_value};
      detail::check_finite_loss(record.total, epoch);
      result.losses.push_back({2, t, record});
    }
    detail::for_each_snapshot(dg.size(), cfg.threads, [&](std::size_t t) {
      states[t] = make_state(dg[t], configs[t], models[t].encoder(), models[t].centers());
    });
    if (observer) observer(epoch, states);
  }
  result.stage2 = std::move(states);
  return result;
}

struct MetricsRow {
  std::size_t t = 0;
  std::size_t n = 0;
  double acc = std::numeric_limits<double>::quiet_NaN();
  double nmi = std::numeric_limits<double>::quiet_NaN();
  double ari = std::numeric_limits<double>::quiet_NaN();
  double modularity = std::numeric_limits<double>::quiet_NaN();
};

struct MetricsTable {
  std::vector<MetricsRow> rows;
  MetricsRow mean;
};

/// Predicted labels of one snapshot under the configured evaluation mode.
inline Labels predicted_labels(const SnapshotState& s, const PipelineConfig& cfg, std::size_t t) {
  if (cfg.mode == EvalMode::kVarying) return hard_labels(s.assignment);
  return kmeans(s.embedding, cfg.clusters, cfg.snapshot_seed(t)).labels;
}

/// Label-based metrics skip isolated nodes; modularity uses every node (isolated
/// nodes contribute nothing to it).
inline MetricsRow score_snapshot(const SnapshotGraph& g, const Labels& pred, std::size_t t) {
  if (pred.size() != g.num_nodes()) throw ContractError("score_snapshot: one label per node expected");
  MetricsRow row;
  row.t = t;
  Labels truth, kept;
  const Vector degree = g.weights().rowwise().sum();
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    if (degree(static_cast<Eigen::Index>(i)) <= 0.0) continue;
    if (g.has_labels()) truth.push_back(g.labels()[i]);
    kept.push_back(pred[i]);
  }
  row.n = kept.size();
  if (g.has_labels() && !kept.empty()) {
    row.acc = accuracy(truth, kept);
    row.nmi = nmi(truth, kept);
    row.ari = ari(truth, kept);
  }
  row.modularity = modularity(g, pred);
  return row;
}

inline MetricsTable summarize(std::vector<MetricsRow> rows) {
  MetricsTable table;
  table.rows = std::move(rows);
  const auto mean_of = [&](double MetricsRow::*field) {
    double sum = 0.0;
    for (const auto& r : table.rows) sum += r.*field;
    return sum / static_cast<double>(table.rows.size());
  };
  double n_sum = 0.0;
  for (const auto& r : table.rows) n_sum += static_cast<double>(r.n);
  table.mean.n = static_cast<std::size_t>(std::llround(n_sum / static_cast<double>(table.rows.size())));
  table.mean.acc = mean_of(&MetricsRow::acc);
  table.mean.nmi = mean_of(&MetricsRow::nmi);
  table.mean.ari = mean_of(&MetricsRow::ari);
  table.mean.modularity = mean_of(&MetricsRow::modularity);
  return table;
}

/// Per-snapshot ACC/NMI/ARI/Modularity plus their unweighted means.
inline MetricsTable evaluate(const std::vector<SnapshotState>& states, const DynamicGraph& dg,
                             const PipelineConfig& cfg) {
  if (states.size() != dg.size()) throw ContractError("evaluate: state count does not match snapshot count");
  std::vector<MetricsRow> rows;
  for (std::size_t t = 0; t < dg.size(); ++t) rows.push_back(score_snapshot(dg[t], predicted_labels(states[t], cfg, t), t));
  return summarize(std::move(rows));
}

struct ConsistencyRow {
  std::size_t t = 0;  // distance between t and t + 1
  int dim = 0;
  double before = 0.0;
  double after = std::numeric_limits<double>::quiet_NaN();
};

struct ConsistencyReport {
  std::vector<ConsistencyRow> rows;
  double mean_before = 0.0, std_before = 0.0;
  double mean_after = std::numeric_limits<double>::quiet_NaN();
  double std_after = std::numeric_limits<double>::quiet_NaN();
};

/// W_{1,inf} between consecutive community diagrams, per dimension.
inline std::vector<double> consecutive_distances(const std::vector<SnapshotState>& states, int dim) {
  std::vector<double> out;
  for (std::size_t t = 0; t + 1 < states.size(); ++t) {
    out.push_back(wasserstein_distance(diagram_of(states[t].topology.diagram, dim),
                                       diagram_of(states[t + 1].topology.diagram, dim))
                      .distance);
  }
  return out;
}

inline ConsistencyReport consistency_report(const RunResult& result) {
  ConsistencyReport report;
  const auto stats = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    sd = std::sqrt(var / static_cast<double>(v.size()));
  };
  std::vector<double> all_before, all_after;
  for (int dim : kLossDimensions) {
    const auto before = consecutive_distances(result.stage1, dim);
    std::vector<double> after;
    if (!result.stage2.empty()) after = consecutive_distances(result.stage2, dim);
    for (std::size_t t = 0; t < before.size(); ++t) {
      ConsistencyRow row{t, dim, before[t]};
      all_before.push_back(before[t]);
      if (!after.empty()) {
        row.after = after[t];
        all_after.push_back(after[t]);
      }
      report.rows.push_back(row);
    }
  }
  if (!all_before.empty()) stats(all_before, report.mean_before, report.std_before);
  if (!all_after.empty()) stats(all_after, report.mean_after, report.std_after);
  return report;
}

}  // namespace toporeg
