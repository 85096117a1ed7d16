#pragma once

// Weight rank clique filtration (WRCF) of a community network and its
// persistent homology in dimensions 0 and 1.
//
// Edges enter in decreasing weight order; level i holds every edge whose
// weight is >= the i-th largest distinct weight, and every triangle of the
// threshold graph (cliques are truncated at dimension 2). Vertices of active
// communities sit at level 0.
//
// Diagram coordinates are 1 - w for a simplex entering at weight w, and 0 for
// vertices, so births precede deaths and a weight change of eps moves the
// matching coordinate by exactly eps. Essential classes are reported with an
// infinite death that is capped at 1.0 when diagrams are compared.

#include <toporeg/errors.hpp>
#include <toporeg/types.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace toporeg {

struct Simplex {
  std::vector<int> vertices;  // sorted community ids
  int level = 0;              // filtration index
  double value = 0.0;         // diagram coordinate at entry

  int dim() const noexcept { return static_cast<int>(vertices.size()) - 1; }
};

/// Strict simplex order: level, then dimension, then lexicographic vertex set.
inline bool simplex_before(const Simplex& a, const Simplex& b) {
  if (a.level != b.level) return a.level < b.level;
  if (a.dim() != b.dim()) return a.dim() < b.dim();
  return a.vertices < b.vertices;
}

struct Filtration {
  std::vector<int> vertices;          // active communities
  std::vector<Simplex> simplices;     // in strict filtration order
  std::vector<double> level_weights;  // strictly decreasing; level i >= 1 uses level_weights[i - 1]

  int num_levels() const noexcept { return static_cast<int>(level_weights.size()); }

  /// Diagram coordinate of a level: 0 for vertices, 1 - w otherwise.
  double level_value(int level) const {
    return level == 0 ? 0.0 : 1.0 - level_weights.at(static_cast<std::size_t>(level - 1));
  }
};

/// Maximal normalized filtration extent; essential deaths are capped here.
inline constexpr double kEssentialCap = 1.0;

/// WRCF of a symmetric community network restricted to `active` communities.
/// Off-diagonal entries <= 0 are not edges; the diagonal is ignored.
inline Filtration wrcf_filtration(const Matrix& m, const std::vector<int>& active) {
  if (m.rows() != m.cols()) throw ContractError("wrcf_filtration: community network must be square");
  if (active.empty()) throw ContractError("wrcf_filtration: no active communities");
  Filtration f;
  f.vertices = active;
  std::sort(f.vertices.begin(), f.vertices.end());

  struct Edge {
    int u, v;
    double w;
  };
  std::vector<Edge> edges;
  for (std::size_t a = 0; a < f.vertices.size(); ++a) {
    for (std::size_t b = a + 1; b < f.vertices.size(); ++b) {
      const int u = f.vertices[a], v = f.vertices[b];
      const double w = m(u, v);
      if (w > 0.0) edges.push_back({u, v, w});
    }
  }
  for (const auto& e : edges) f.level_weights.push_back(e.w);
  std::sort(f.level_weights.begin(), f.level_weights.end(), std::greater<>());
  f.level_weights.erase(std::unique(f.level_weights.begin(), f.level_weights.end()), f.level_weights.end());
  const auto level_of = [&](double w) {
    const auto it = std::lower_bound(f.level_weights.begin(), f.level_weights.end(), w, std::greater<>());
    return static_cast<int>(it - f.level_weights.begin()) + 1;
  };

  for (int v : f.vertices) f.simplices.push_back({{v}, 0, 0.0});
  std::map<std::pair<int, int>, int> edge_level;
  for (const auto& e : edges) {
    const int level = level_of(e.w);
    edge_level[{e.u, e.v}] = level;
    f.simplices.push_back({{e.u, e.v}, level, f.level_value(level)});
  }
  // Triangles of the clique complex enter with their last edge.
  const auto n = f.vertices.size();
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const auto ab = edge_level.find({f.vertices[a], f.vertices[b]});
      if (ab == edge_level.end()) continue;
      for (std::size_t c = b + 1; c < n; ++c) {
        const auto ac = edge_level.find({f.vertices[a], f.vertices[c]});
        const auto bc = edge_level.find({f.vertices[b], f.vertices[c]});
        if (ac == edge_level.end() || bc == edge_level.end()) continue;
        const int level = std::max({ab->second, ac->second, bc->second});
        f.simplices.push_back({{f.vertices[a], f.vertices[b], f.vertices[c]}, level, f.level_value(level)});
      }
    }
  }
  std::sort(f.simplices.begin(), f.simplices.end(), simplex_before);
  return f;
}

/// Sparse GF(2) boundary columns of a filtration, indexed by simplex position.
struct BoundaryMatrix {
  std::vector<std::vector<int>> columns;  // sorted row indices
};

inline BoundaryMatrix boundary_matrix(const Filtration& f) {
  std::map<std::vector<int>, int> position;
  for (std::size_t i = 0; i < f.simplices.size(); ++i) {
    if (!position.emplace(f.simplices[i].vertices, static_cast<int>(i)).second) {
      throw IntegrityError("duplicate simplex in filtration");
    }
  }
  BoundaryMatrix d;
  d.columns.resize(f.simplices.size());
  for (std::size_t i = 0; i < f.simplices.size(); ++i) {
    const auto& s = f.simplices[i];
    if (s.dim() == 0) continue;
    for (std::size_t drop = 0; drop < s.vertices.size(); ++drop) {
      std::vector<int> face;
      for (std::size_t k = 0; k < s.vertices.size(); ++k) {
        if (k != drop) face.push_back(s.vertices[k]);
      }
      const auto it = position.find(face);
      if (it == position.end() || it->second >= static_cast<int>(i)) {
        throw IntegrityError("face of a simplex enters after the simplex");
      }
      if (f.simplices[it->second].level > s.level) throw IntegrityError("face has a later filtration level");
      d.columns[i].push_back(it->second);
    }
    std::sort(d.columns[i].begin(), d.columns[i].end());
  }
  return d;
}

namespace detail {

// Symmetric difference of two sorted index lists (GF(2) column addition).
inline std::vector<int> add_columns(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace detail

struct PersistencePair {
  int dim = 0;
  double birth = 0.0;
  double death = std::numeric_limits<double>::infinity();  // infinite for essential classes
  int birth_level = 0;
  int death_level = -1;  // -1 for essential classes
  int creator = -1;      // simplex position
  int destroyer = -1;    // simplex position, -1 for essential classes

  bool essential() const noexcept { return destroyer < 0; }
};

/// A (birth, death) point as used for diagram distances.
struct DiagramPoint {
  double birth = 0.0;
  double death = 0.0;
  int pair = -1;  // index into PersistenceDiagram::pairs, -1 if synthetic
};

struct PersistenceDiagram {
  std::vector<PersistencePair> pairs;
  double extent = kEssentialCap;

  /// Points of one dimension with essential deaths capped at `extent`.
  /// With `drop_global`, the oldest essential H0 class is left out.
  std::vector<DiagramPoint> points(int dim, bool drop_global = true) const {
    int global = -1;
    if (drop_global && dim == 0) {
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        if (p.dim == 0 && p.essential() && (global < 0 || p.creator < pairs[global].creator)) {
          global = static_cast<int>(i);
        }
      }
    }
    std::vector<DiagramPoint> out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& p = pairs[i];
      if (p.dim != dim || static_cast<int>(i) == global) continue;
      out.push_back({p.birth, p.essential() ? extent : p.death, static_cast<int>(i)});
    }
    return out;
  }
};

/// GF(2) column reduction over the strict simplex order. Zero-persistence
/// pairs (birth and death on the same level) are dropped.
inline PersistenceDiagram compute_persistence(const Filtration& f) {
  BoundaryMatrix d = boundary_matrix(f);
  const auto n = d.columns.size();
  std::vector<int> column_with_low(n, -1);
  std::vector<char> is_destroyer(n, 0), is_creator_paired(n, 0);
  PersistenceDiagram dgm;
  for (std::size_t j = 0; j < n; ++j) {
    auto& col = d.columns[j];
    while (!col.empty() && column_with_low[col.back()] >= 0) {
      col = detail::add_columns(col, d.columns[column_with_low[col.back()]]);
    }
    if (col.empty()) continue;
    const int low = col.back();
    column_with_low[low] = static_cast<int>(j);
    is_destroyer[j] = 1;
    is_creator_paired[low] = 1;
    const auto& sigma = f.simplices[low];
    const auto& tau = f.simplices[j];
    if (sigma.level == tau.level) continue;
    dgm.pairs.push_back({sigma.dim(), sigma.value, tau.value, sigma.level, tau.level, low, static_cast<int>(j)});
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (is_destroyer[j] || is_creator_paired[j]) continue;
    const auto& sigma = f.simplices[j];
    if (sigma.dim() > 1) continue;  // no 3-simplices exist, so 2-cycles are out of scope
    PersistencePair p;
    p.dim = sigma.dim();
    p.birth = sigma.value;
    p.birth_level = sigma.level;
    p.creator = static_cast<int>(j);
    dgm.pairs.push_back(p);
  }
  return dgm;
}

/// Community-graph edge (u < v) a diagram coordinate is attributed to.
using CommunityEdge = std::pair<int, int>;

struct InverseMapEntry {
  std::optional<CommunityEdge> birth_edge;  // none for vertex-born (H0) classes
  std::optional<CommunityEdge> death_edge;  // none for essential classes
};

namespace detail {

// A triangle is attributed to the face edge that enters last in the strict order.
inline CommunityEdge last_edge_of_triangle(const Filtration& f, const Simplex& tri) {
  int best = -1;
  for (std::size_t i = 0; i < f.simplices.size(); ++i) {
    const auto& s = f.simplices[i];
    if (s.dim() != 1) continue;
    if (std::includes(tri.vertices.begin(), tri.vertices.end(), s.vertices.begin(), s.vertices.end())) {
      best = static_cast<int>(i);
    }
  }
  const auto& e = f.simplices.at(static_cast<std::size_t>(best));
  return {e.vertices[0], e.vertices[1]};
}

inline std::optional<CommunityEdge> edge_of(const Filtration& f, int position) {
  if (position < 0) return std::nullopt;
  const auto& s = f.simplices[static_cast<std::size_t>(position)];
  if (s.dim() == 0) return std::nullopt;
  if (s.dim() == 1) return CommunityEdge{s.vertices[0], s.vertices[1]};
  return last_edge_of_triangle(f, s);
}

}  // namespace detail

/// Maps every pair of the diagram to the community edges whose weights set
/// its birth and death coordinates.
inline std::vector<InverseMapEntry> inverse_map(const Filtration& f, const PersistenceDiagram& dgm) {
  std::vector<InverseMapEntry> out;
  out.reserve(dgm.pairs.size());
  for (const auto& p : dgm.pairs) {
    out.push_back({detail::edge_of(f, p.creator), detail::edge_of(f, p.destroyer)});
  }
  return out;
}

/// "dim birth death creator_edge destroyer_edge" lines; essential deaths as
/// "inf", missing edges as "-".
inline void write_diagram(const std::string& path, const Filtration& f, const PersistenceDiagram& dgm,
                          int dim = -1) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out.precision(17);
  const auto inv = inverse_map(f, dgm);
  const auto edge_text = [](const std::optional<CommunityEdge>& e) {
    return e ? std::to_string(e->first) + "-" + std::to_string(e->second) : std::string("-");
  };
  for (std::size_t i = 0; i < dgm.pairs.size(); ++i) {
    const auto& p = dgm.pairs[i];
    if (dim >= 0 && p.dim != dim) continue;
    out << p.dim << ' ' << p.birth << ' ';
    if (p.essential()) {
      out << "inf";
    } else {
      out << p.death;
    }
    out << ' ' << edge_text(inv[i].birth_edge) << ' ' << edge_text(inv[i].death_edge) << '\n';
  }
}

}  // namespace toporeg
