#include <toporeg/topo_loss.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <set>

using namespace toporeg;

namespace {

Diagram diagram(int dim, std::initializer_list<std::pair<double, double>> points) {
  Diagram d{dim, {}};
  for (const auto& [b, e] : points) d.points.push_back({b, e, -1});
  return d;
}

Diagram random_diagram(int dim, int max_points, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(0, max_points);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Diagram d{dim, {}};
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    const double b = u(rng);
    d.points.push_back({b, b + u(rng), -1});
  }
  return d;
}

// Minimum over every partial injection of d1 into d2, leftovers to the diagonal.
double brute_force_w1(const Diagram& d1, const Diagram& d2) {
  const auto inf_dist = [](const DiagramPoint& x, const DiagramPoint& y) {
    return std::max(std::abs(x.birth - y.birth), std::abs(x.death - y.death));
  };
  const auto diag = [](const DiagramPoint& x) { return std::abs(x.death - x.birth) / 2.0; };
  std::vector<char> used(d2.points.size(), 0);
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, double)> go = [&](std::size_t i, double acc) {
    if (i == d1.points.size()) {
      double rest = acc;
      for (std::size_t j = 0; j < d2.points.size(); ++j) {
        if (!used[j]) rest += diag(d2.points[j]);
      }
      best = std::min(best, rest);
      return;
    }
    go(i + 1, acc + diag(d1.points[i]));
    for (std::size_t j = 0; j < d2.points.size(); ++j) {
      if (used[j]) continue;
      used[j] = 1;
      go(i + 1, acc + inf_dist(d1.points[i], d2.points[j]));
      used[j] = 0;
    }
  };
  go(0, 0.0);
  return best;
}

// Diagram with one finite H0 pair besides the global class.
PersistenceDiagram h0_diagram(std::vector<std::pair<double, double>> finite) {
  PersistenceDiagram d;
  d.pairs.push_back({0, 0.0, std::numeric_limits<double>::infinity(), 0, -1, 0, -1});
  int next = 1;
  for (const auto& [b, e] : finite) d.pairs.push_back({0, b, e, 0, 1, next++, 100});
  return d;
}

Matrix random_network(int k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m = Matrix::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    m(i, i) = u(rng);
    for (int j = i + 1; j < k; ++j) {
      if (u(rng) < 0.8) m(i, j) = m(j, i) = 0.02 + 0.5 * u(rng);
    }
  }
  return m;
}

std::vector<int> all_of(int k) {
  std::vector<int> v;
  for (int i = 0; i < k; ++i) v.push_back(i);
  return v;
}

}  // namespace

TEST(Wasserstein, IdenticalIsZero) {
  const auto d = diagram(0, {{0.1, 0.5}, {0.2, 0.9}});
  const auto r = wasserstein_distance(d, d);
  EXPECT_EQ(r.distance, 0.0);
  for (const auto& p : r.matching.pairs) EXPECT_EQ(p.first, p.second);
}

TEST(Wasserstein, SinglePointAgainstEmpty) {
  EXPECT_DOUBLE_EQ(wasserstein_distance(diagram(0, {{0, 2}}), diagram(0, {})).distance, 1.0);
  EXPECT_DOUBLE_EQ(wasserstein_distance(diagram(0, {}), diagram(0, {{0, 2}})).distance, 1.0);
  EXPECT_EQ(wasserstein_distance(diagram(1, {}), diagram(1, {})).distance, 0.0);
}

TEST(Wasserstein, DirectMatchBeatsDiagonalRoute) {
  const auto r = wasserstein_distance(diagram(0, {{0, 2}}), diagram(0, {{0, 4}}));
  EXPECT_DOUBLE_EQ(r.distance, 2.0);
  ASSERT_EQ(r.matching.pairs.size(), 1U);
  EXPECT_EQ(r.matching.pairs[0].first, 0);
  EXPECT_EQ(r.matching.pairs[0].second, 0);
}

TEST(Wasserstein, DimensionMismatch) {
  EXPECT_THROW(wasserstein_distance(diagram(0, {}), diagram(1, {})), ContractError);
}

TEST(Wasserstein, MatchesBruteForce) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const auto a = random_diagram(0, 4, rng);
    const auto b = random_diagram(0, 4, rng);
    const auto r = wasserstein_distance(a, b);
    EXPECT_NEAR(r.distance, brute_force_w1(a, b), 1e-12);
    EXPECT_NEAR(matching_cost(a, b, r.matching), r.distance, 1e-12);
  }
}

TEST(Wasserstein, MetricAxioms) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const auto a = random_diagram(1, 5, rng);
    const auto b = random_diagram(1, 5, rng);
    const auto c = random_diagram(1, 5, rng);
    const double ab = wasserstein_distance(a, b).distance;
    EXPECT_NEAR(ab, wasserstein_distance(b, a).distance, 1e-12);
    EXPECT_EQ(wasserstein_distance(a, a).distance, 0.0);
    EXPECT_LE(wasserstein_distance(a, c).distance, ab + wasserstein_distance(b, c).distance + 1e-9);
  }
}

TEST(TopoLoss, IdenticalDiagramsGiveZero) {
  const auto d = h0_diagram({{0.1, 0.6}});
  const auto report = topo_loss({d, d, d, d});
  EXPECT_EQ(report.loss, 0.0);
  EXPECT_FALSE(report.warning.has_value());
  EXPECT_EQ(report.terms.size(), 4U);
}

TEST(TopoLoss, SinglePerturbedSnapshot) {
  const double b = 0.2, d = 0.7;
  const auto report = topo_loss({h0_diagram({}), h0_diagram({{b, d}}), h0_diagram({})});
  // Snapshot 1 is compared with both neighbors once.
  EXPECT_NEAR(report.loss, 2.0 * (d - b) / 2.0, 1e-15);
}

TEST(TopoLoss, NeighborsOfPerturbedSnapshotCountTwice) {
  const double b = 0.2, d = 0.7;
  const auto base = h0_diagram({});
  const auto report = topo_loss({base, base, h0_diagram({{b, d}}), base, base});
  // t=1 and t=3 each see it once, t=2 sees it twice.
  EXPECT_NEAR(report.loss, 4.0 * (d - b) / 2.0, 1e-15);
}

TEST(TopoLoss, HomogeneousInGaps) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<PersistenceDiagram> one, two;
  for (int t = 0; t < 4; ++t) {
    std::vector<std::pair<double, double>> pts, doubled;
    for (int i = 0; i < 3; ++i) {
      const double b = u(rng), gap = u(rng);
      pts.push_back({b, b + gap});
      doubled.push_back({2.0 * b, 2.0 * (b + gap)});
    }
    one.push_back(h0_diagram(pts));
    two.push_back(h0_diagram(doubled));
  }
  EXPECT_NEAR(topo_loss(two).loss, 2.0 * topo_loss(one).loss, 1e-12);
}

TEST(TopoLoss, TooFewSnapshotsWarns) {
  const auto report = topo_loss({h0_diagram({{0, 1}}), h0_diagram({})});
  EXPECT_EQ(report.loss, 0.0);
  EXPECT_TRUE(report.warning.has_value());
}

TEST(TopoGradient, ZeroLossGivesZeroGradient) {
  std::mt19937_64 rng(4);
  const Matrix m = random_network(5, rng);
  const auto topo = snapshot_topology(m, all_of(5));
  const auto terms = local_terms(topo, {&topo.diagram, &topo.diagram});
  EXPECT_EQ(terms_value(terms), 0.0);
  EXPECT_TRUE(topo_gradient(topo, terms).isZero());
}

TEST(TopoGradient, FiniteDifferenceUnderFrozenMatching) {
  std::mt19937_64 rng(5);
  int checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix m = random_network(5, rng);
    const auto topo = snapshot_topology(m, all_of(5));
    const auto prev = snapshot_topology(random_network(5, rng), all_of(5));
    const auto next = snapshot_topology(random_network(5, rng), all_of(5));
    const auto terms = local_terms(topo, {&prev.diagram, &next.diagram});
    EXPECT_NEAR(frozen_topo_loss(m, topo, terms), terms_value(terms), 1e-12);
    const Matrix grad = topo_gradient(topo, terms);
    Matrix numeric = Matrix::Zero(5, 5);
    const double h = 1e-7;
    for (int u = 0; u < 5; ++u) {
      for (int v = u + 1; v < 5; ++v) {
        Matrix plus = m, minus = m;
        plus(u, v) += h;
        minus(u, v) -= h;
        numeric(u, v) = (frozen_topo_loss(plus, topo, terms) - frozen_topo_loss(minus, topo, terms)) / (2.0 * h);
      }
    }
    const double scale = std::max({grad.norm(), numeric.norm(), 1e-8});
    EXPECT_LT((grad - numeric).norm() / scale, 1e-3) << "trial " << trial;
    ++checked;
  }
  EXPECT_EQ(checked, 50);
}

TEST(TopoGradient, SupportWithinInverseMap) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const auto topo = snapshot_topology(random_network(6, rng), all_of(6));
    const auto other = snapshot_topology(random_network(6, rng), all_of(6));
    const Matrix grad = topo_gradient(topo, local_terms(topo, {&other.diagram}));
    std::set<CommunityEdge> allowed;
    for (const auto& e : topo.inverse) {
      if (e.birth_edge) allowed.insert(*e.birth_edge);
      if (e.death_edge) allowed.insert(*e.death_edge);
    }
    for (int u = 0; u < 6; ++u) {
      for (int v = 0; v < 6; ++v) {
        if (grad(u, v) != 0.0) {
          EXPECT_TRUE(allowed.count({u, v})) << u << "," << v;
        }
      }
    }
  }
}

TEST(TopoGradient, SmallDescentStepLowersLoss) {
  std::mt19937_64 rng(7);
  int trials = 0, decreased = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix m = random_network(5, rng);
    const auto topo = snapshot_topology(m, all_of(5));
    const auto prev = snapshot_topology(random_network(5, rng), all_of(5));
    const auto next = snapshot_topology(random_network(5, rng), all_of(5));
    const auto terms = local_terms(topo, {&prev.diagram, &next.diagram});
    const Matrix grad = topo_gradient(topo, terms);
    if (grad.isZero()) continue;
    const Matrix stepped = m - 1e-4 * (grad + grad.transpose());
    const auto moved = snapshot_topology(stepped, all_of(5));
    const double after = terms_value(local_terms(moved, {&prev.diagram, &next.diagram}));
    ++trials;
    decreased += after < terms_value(terms) ? 1 : 0;
  }
  ASSERT_GT(trials, 100);
  EXPECT_GE(decreased, 0.95 * trials);
}
