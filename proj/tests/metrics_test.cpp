#include <toporeg/metrics.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

using namespace toporeg;

namespace {

SnapshotGraph two_triangles() {
  Matrix w = Matrix::Zero(6, 6);
  for (auto [u, v] : {std::pair{0, 1}, {0, 2}, {1, 2}, {3, 4}, {3, 5}, {4, 5}}) w(u, v) = w(v, u) = 1.0;
  return SnapshotGraph({"a", "b", "c", "d", "e", "f"}, w);
}

Labels random_labels(std::size_t n, int k, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, k - 1);
  Labels l(n);
  for (auto& x : l) x = pick(rng);
  return l;
}

// Hubert-Arabie ARI from the four pair counts.
double pair_count_ari(const Labels& a, const Labels& b) {
  double same_both = 0, same_a = 0, same_b = 0, pairs = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      same_both += sa && sb;
      same_a += sa;
      same_b += sb;
      pairs += 1;
    }
  }
  const double expected = same_a * same_b / pairs;
  const double max_index = 0.5 * (same_a + same_b);
  if (max_index == expected) return 1.0;
  return (same_both - expected) / (max_index - expected);
}

}  // namespace

TEST(Accuracy, IdenticalAndPermuted) {
  const Labels truth{0, 0, 1, 1, 2, 2, 2};
  EXPECT_DOUBLE_EQ(accuracy(truth, truth), 1.0);
  EXPECT_DOUBLE_EQ(accuracy(truth, {5, 5, 3, 3, 9, 9, 9}), 1.0);
  EXPECT_DOUBLE_EQ(accuracy(truth, {2, 2, 0, 0, 1, 1, 1}), 1.0);
}

TEST(Accuracy, TwoBijections) {
  EXPECT_DOUBLE_EQ(accuracy({0, 0, 1, 1}, {1, 1, 1, 0}), 0.75);
}

TEST(Accuracy, MoreClustersThanTruth) {
  EXPECT_DOUBLE_EQ(accuracy({0, 0, 0, 0}, {0, 0, 1, 2}), 0.5);
  EXPECT_DOUBLE_EQ(accuracy({0, 1, 2, 3}, {0, 0, 0, 0}), 0.25);
}

TEST(Accuracy, MatchesBruteForceOverBijections) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Labels truth = random_labels(20, 4, rng);
    const Labels pred = random_labels(20, 4, rng);
    std::vector<int> perm{0, 1, 2, 3};
    double best = 0.0;
    do {
      double hit = 0;
      for (std::size_t i = 0; i < truth.size(); ++i) hit += perm[pred[i]] == truth[i];
      best = std::max(best, hit / 20.0);
    } while (std::next_permutation(perm.begin(), perm.end()));
    EXPECT_DOUBLE_EQ(accuracy(truth, pred), best);
  }
}

TEST(Accuracy, Errors) {
  EXPECT_THROW(accuracy({}, {}), ContractError);
  EXPECT_THROW(accuracy({0, 1}, {0}), ContractError);
}

TEST(Nmi, Conventions) {
  EXPECT_DOUBLE_EQ(nmi({0, 0, 1, 1}, {0, 0, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(nmi({0, 0, 1, 1}, {7, 7, 3, 3}), 1.0);
  EXPECT_DOUBLE_EQ(nmi({0, 0, 1, 1}, {0, 0, 0, 0}), 0.0);
  EXPECT_NEAR(nmi({0, 0, 1, 1}, {0, 1, 0, 1}), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(nmi({3, 3, 3}, {1, 1, 1}), 1.0);
  EXPECT_THROW(nmi({}, {}), ContractError);
}

TEST(Nmi, KnownValue) {
  // H(truth) = ln 2, H(pred) = -(3/4 ln 3/4 + 1/4 ln 1/4), I = H(pred) - 1/2 ln 2.
  const double hp = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25));
  const double mi = hp - 0.5 * std::log(2.0);
  EXPECT_NEAR(nmi({0, 0, 1, 1}, {0, 0, 1, 0}), mi / (0.5 * (std::log(2.0) + hp)), 1e-14);
}

TEST(Ari, KnownValues) {
  EXPECT_DOUBLE_EQ(ari({0, 0, 1, 1}, {1, 1, 0, 0}), 1.0);
  EXPECT_NEAR(ari({0, 0, 1, 1}, {0, 0, 1, 0}), 0.0, 1e-15);
  EXPECT_NEAR(ari({0, 0, 1, 1}, {0, 0, 1, 0}), pair_count_ari({0, 0, 1, 1}, {0, 0, 1, 0}), 1e-15);
  EXPECT_THROW(ari({0}, {0}), ContractError);
}

TEST(Ari, MatchesPairCounting) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Labels a = random_labels(25, 3, rng), b = random_labels(25, 4, rng);
    EXPECT_NEAR(ari(a, b), pair_count_ari(a, b), 1e-12);
  }
}

TEST(Ari, ChanceLevelNearZero) {
  std::mt19937_64 rng(3);
  double sum = 0.0;
  for (int trial = 0; trial < 1000; ++trial) sum += ari(random_labels(60, 4, rng), random_labels(60, 4, rng));
  EXPECT_NEAR(sum / 1000.0, 0.0, 0.02);
}

TEST(Modularity, TwoTriangles) {
  const auto g = two_triangles();
  EXPECT_NEAR(modularity(g, {0, 0, 0, 1, 1, 1}), 0.5, 1e-15);
  EXPECT_NEAR(modularity(g, {4, 4, 4, 4, 4, 4}), 0.0, 1e-15);
  EXPECT_THROW(modularity(g, {0, 1}), ContractError);
  EXPECT_THROW(modularity(SnapshotGraph({"a", "b"}, Matrix::Zero(2, 2)), {0, 1}), DegenerateError);
}

TEST(Modularity, DoubleSumDefinition) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 12;
    Matrix w = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (u(rng) < 0.4) w(i, j) = w(j, i) = u(rng);
      }
    }
    w(0, 1) = w(1, 0) = 1.0;
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back(std::to_string(i));
    const SnapshotGraph g(ids, w);
    const Labels c = random_labels(n, 3, rng);
    const Vector d = w.rowwise().sum();
    const double two_m = w.sum();
    double q = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (c[i] == c[j]) q += w(i, j) - d(i) * d(j) / two_m;
      }
    }
    EXPECT_NEAR(modularity(g, c), q / two_m, 1e-12);
  }
}

TEST(KMeans, SeparatedClouds) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.1);
  Matrix pts(40, 2);
  Labels truth;
  for (int i = 0; i < 40; ++i) {
    const double offset = i < 20 ? 0.0 : 100.0;
    pts(i, 0) = offset + noise(rng);
    pts(i, 1) = offset + noise(rng);
    truth.push_back(i < 20 ? 0 : 1);
  }
  const auto r = kmeans(pts, 2, 9);
  EXPECT_DOUBLE_EQ(accuracy(truth, r.labels), 1.0);
}

TEST(KMeans, SingleClusterAndErrors) {
  Matrix pts = Matrix::Random(10, 3);
  const auto r = kmeans(pts, 1, 1);
  EXPECT_TRUE(std::all_of(r.labels.begin(), r.labels.end(), [](int l) { return l == 0; }));
  EXPECT_TRUE(r.centers.row(0).isApprox(pts.colwise().mean(), 1e-12));
  EXPECT_THROW(kmeans(pts, 11, 1), ContractError);
  EXPECT_THROW(kmeans(pts, 0, 1), ContractError);
}

TEST(KMeans, Deterministic) {
  Matrix pts = Matrix::Random(30, 4);
  const auto a = kmeans(pts, 3, 42), b = kmeans(pts, 3, 42);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.centers, b.centers);
}

TEST(KMeans, NearOptimalOnEightPoints) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  int good = 0;
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    Matrix pts(8, 2);
    for (int i = 0; i < 8; ++i) pts.row(i) << g(rng), g(rng);
    double best = std::numeric_limits<double>::infinity();
    for (int mask = 1; mask < 255; ++mask) {
      double inertia = 0.0;
      for (int side = 0; side < 2; ++side) {
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(2);
        int count = 0;
        for (int i = 0; i < 8; ++i) {
          if (((mask >> i) & 1) == side) {
            mean += pts.row(i);
            ++count;
          }
        }
        mean /= count;
        for (int i = 0; i < 8; ++i) {
          if (((mask >> i) & 1) == side) inertia += (pts.row(i) - mean).squaredNorm();
        }
      }
      best = std::min(best, inertia);
    }
    good += kmeans(pts, 2, static_cast<std::uint64_t>(s)).inertia <= best * (1.0 + 1e-9);
  }
  EXPECT_GE(good, 0.9 * seeds);
}

TEST(Hungarian, MatchesBruteForce) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 6;
    Matrix cost(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) cost(i, j) = u(rng);
    }
    const auto a = hungarian_assignment(cost);
    double got = 0.0;
    for (int i = 0; i < n; ++i) got += cost(i, a[i]);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double c = 0.0;
      for (int i = 0; i < n; ++i) c += cost(i, perm[i]);
      best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    EXPECT_NEAR(got, best, 1e-9);
    std::vector<int> sorted = a;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
  }
}

TEST(Hungarian, RectangularLeavesSurplusRows) {
  Matrix cost(3, 2);
  cost << 1, 9, 9, 1, 5, 5;
  const auto a = hungarian_assignment(cost);
  EXPECT_EQ(a[0], 0);
  EXPECT_EQ(a[1], 1);
  EXPECT_EQ(a[2], -1);
}
