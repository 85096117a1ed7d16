#include <toporeg/mfc.hpp>

#include "gradcheck.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace toporeg;
using toporeg::testing::gradient_error;
using toporeg::testing::random_matrix;

TEST(Assignment, EmbeddingEqualToCentersGivesIdentity) {
  std::mt19937_64 rng(1);
  const Matrix c = random_matrix(4, 4, rng) + 4.0 * Matrix::Identity(4, 4);
  Tape tape;
  const auto q = compute_assignment(tape.constant(c), tape.constant(c), 0.0);
  EXPECT_TRUE(q.value().isApprox(Matrix::Identity(4, 4), 1e-10));
  EXPECT_EQ(hard_labels(q.value()), (Labels{0, 1, 2, 3}));
}

TEST(Assignment, ConstantRowIsUniform) {
  Matrix z(2, 3);
  z << 2, 2, 2, 1, 0, 5;
  Tape tape;
  const Matrix q = compute_assignment(tape.constant(z), tape.constant(Matrix::Identity(3, 3)), 0.0).value();
  for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(q(0, k), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(q(1, 0), 0.2);
  EXPECT_DOUBLE_EQ(q(1, 1), 0.0);
  EXPECT_DOUBLE_EQ(q(1, 2), 1.0);
}

TEST(Assignment, ArgmaxInvariantUnderRescaling) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix z = random_matrix(12, 6, rng);
    const Matrix c = random_matrix(4, 6, rng);
    Tape tape;
    const Labels base = hard_labels(compute_assignment(tape.constant(z), tape.constant(c), 0.0).value());
    for (double a : {0.5, 2.0, 10.0}) {
      const Labels scaled = hard_labels(compute_assignment(tape.constant(a * z), tape.constant(a * c), 0.0).value());
      EXPECT_EQ(scaled, base) << "a=" << a;
    }
  }
}

TEST(Assignment, WidthMismatch) {
  Tape tape;
  EXPECT_THROW(compute_assignment(tape.constant(Matrix::Ones(3, 4)), tape.constant(Matrix::Identity(3, 3)), 0.0),
               ContractError);
}

TEST(Assignment, ResidualOrthogonalToCenters) {
  std::mt19937_64 rng(3);
  const Matrix z = random_matrix(20, 8, rng);
  const Matrix c = random_matrix(3, 8, rng);
  Tape tape;
  const Matrix pinv = regularized_pinv(tape.constant(c), 1e-12).value();
  const Matrix residual = (z - z * pinv * c) * c.transpose();
  EXPECT_LT(residual.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(ClusteringLoss, ZeroCases) {
  std::mt19937_64 rng(4);
  const Matrix c = random_matrix(3, 3, rng);
  Tape tape;
  EXPECT_NEAR(clustering_loss(tape.constant(c), tape.constant(Matrix::Identity(3, 3)), tape.constant(c)).item(), 0.0,
              1e-15);
  EXPECT_EQ(clustering_loss(tape.constant(Matrix::Zero(5, 3)), tape.constant(Matrix::Ones(5, 2)),
                            tape.constant(Matrix::Zero(2, 3)))
                .item(),
            0.0);
}

TEST(ClusteringLoss, GradientWrtCentersAndEmbedding) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix z = random_matrix(10, 5, rng);
    const Matrix c = random_matrix(3, 5, rng) + 2.0 * Matrix::Identity(3, 5);
    const toporeg::testing::ScalarFn fn = [](Tape&, const std::vector<DiffMatrix>& x) {
      const DiffMatrix q = compute_assignment(x[0], x[1], 1e-6);
      return clustering_loss(x[0], q, x[1]);
    };
    EXPECT_LT(gradient_error(fn, {z, c}), 1e-4);
  }
}

TEST(HardLabels, IdentityTieAndScan) {
  EXPECT_EQ(hard_labels(Matrix::Identity(3, 3)), (Labels{0, 1, 2}));
  EXPECT_EQ(hard_labels(Matrix::Constant(2, 4, 0.25)), (Labels{0, 0}));
  std::mt19937_64 rng(6);
  const Matrix q = random_matrix(50, 6, rng, 0.0, 1.0);
  const Labels labels = hard_labels(q);
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    int best = 0;
    for (int k = 0; k < 6; ++k) {
      if (q(i, k) > q(i, best)) best = k;
    }
    EXPECT_EQ(labels[i], best);
  }
}

TEST(Mfc, EmbeddingNarrowerThanClusters) {
  const auto g = gaussian_partition_graph(5, 6, 0, 1.0, 0.0, 1);
  MfcConfig cfg;
  cfg.clusters = 5;
  cfg.embed_dim = 4;
  EXPECT_THROW(SnapshotModel(g, cfg), RankError);
}

TEST(Mfc, DisjointCliquesRecovered) {
  const auto g = gaussian_partition_graph(5, 12, 0, 1.0, 0.0, 7);
  MfcConfig cfg;
  cfg.clusters = 5;
  cfg.seed = 11;
  const MfcResult r = train_mfc(g, cfg);
  EXPECT_DOUBLE_EQ(accuracy(g.labels(), hard_labels(r.assignment)), 1.0);
  EXPECT_EQ(r.assignment.rows(), static_cast<Eigen::Index>(g.num_nodes()));
  EXPECT_GE(r.assignment.minCoeff(), 0.0);
  EXPECT_LE(r.assignment.maxCoeff(), 1.0);
  EXPECT_FALSE(r.trace.empty());
}

TEST(Mfc, Deterministic) {
  const auto g = gaussian_partition_graph(3, 8, 1, 0.7, 0.05, 3);
  MfcConfig cfg;
  cfg.clusters = 3;
  cfg.embed_dim = 8;
  cfg.epochs = 60;
  cfg.warmup_epochs = 20;
  cfg.seed = 5;
  const MfcResult a = train_mfc(g, cfg);
  const MfcResult b = train_mfc(g, cfg);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(a.trace[i].total, b.trace[i].total);
  EXPECT_EQ(a.assignment, b.assignment);
}

TEST(Mfc, ZeroEpochsLeavesInitialState) {
  const auto g = gaussian_partition_graph(3, 6, 0, 1.0, 0.0, 2);
  MfcConfig cfg;
  cfg.clusters = 3;
  cfg.embed_dim = 6;
  cfg.epochs = 0;
  const MfcResult r = train_mfc(g, cfg);
  EXPECT_TRUE(r.trace.empty());
  EXPECT_EQ(r.encoder.weight, init_encoder(static_cast<Eigen::Index>(g.num_nodes()), 6, cfg.seed).weight);
}
