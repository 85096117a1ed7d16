#pragma once

// Brute-force persistent Betti numbers over GF(2), used to cross-check the
// column-reduction persistence. Ranks are computed from scratch for every
// (i, j), so this is only meant for small filtrations.

#include <toporeg/persistence.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <tuple>
#include <vector>

namespace toporeg {

namespace detail {

using Bits = std::vector<std::uint64_t>;

inline Bits make_bits(std::size_t size) { return Bits((size + 63) / 64, 0); }
inline void flip(Bits& b, std::size_t i) { b[i / 64] ^= std::uint64_t{1} << (i % 64); }
inline bool test(const Bits& b, std::size_t i) { return (b[i / 64] >> (i % 64)) & 1U; }
inline void xor_into(Bits& a, const Bits& b) {
  for (std::size_t k = 0; k < a.size(); ++k) a[k] ^= b[k];
}
inline long highest_bit(const Bits& b) {
  for (std::size_t k = b.size(); k-- > 0;) {
    if (b[k] != 0) return static_cast<long>(k * 64 + 63 - static_cast<std::size_t>(__builtin_clzll(b[k])));
  }
  return -1;
}

// Incremental GF(2) echelon basis keyed by pivot bit.
class EchelonBasis {
 public:
  // Returns true if v was independent of the vectors inserted so far.
  bool insert(Bits v) {
    for (long h = highest_bit(v); h >= 0; h = highest_bit(v)) {
      const auto it = rows_.find(h);
      if (it == rows_.end()) {
        rows_.emplace(h, std::move(v));
        return true;
      }
      xor_into(v, it->second);
    }
    return false;
  }
  std::size_t rank() const noexcept { return rows_.size(); }

 private:
  std::map<long, Bits> rows_;
};

struct ChainSpaces {
  // Per dimension: positions (in filtration order) of the simplices.
  std::array<std::vector<int>, 3> members;
  // Per simplex position: its index within its dimension.
  std::vector<int> local;
};

inline ChainSpaces chain_spaces(const Filtration& f) {
  ChainSpaces cs;
  cs.local.resize(f.simplices.size());
  for (std::size_t i = 0; i < f.simplices.size(); ++i) {
    const int dim = f.simplices[i].dim();
    cs.local[i] = static_cast<int>(cs.members[dim].size());
    cs.members[dim].push_back(static_cast<int>(i));
  }
  return cs;
}

inline int persistent_betti(const Filtration& f, const BoundaryMatrix& d, const ChainSpaces& cs, int i, int j, int p) {
  const auto& p_cells = cs.members[static_cast<std::size_t>(p)];
  const std::size_t p_count = p_cells.size();
  const std::size_t face_count = p == 0 ? 0 : cs.members[static_cast<std::size_t>(p - 1)].size();

  // Cycle space Z_p(K^i): kernel of the boundary restricted to p-cells at level <= i.
  std::vector<detail::Bits> cycles;
  {
    std::map<long, std::pair<detail::Bits, detail::Bits>> pivots;  // boundary pivot -> (boundary, chain)
    for (std::size_t a = 0; a < p_count; ++a) {
      const int pos = p_cells[a];
      if (f.simplices[pos].level > i) continue;
      detail::Bits boundary = detail::make_bits(std::max<std::size_t>(face_count, 1));
      for (int face : d.columns[pos]) detail::flip(boundary, static_cast<std::size_t>(cs.local[face]));
      detail::Bits chain = detail::make_bits(p_count);
      detail::flip(chain, a);
      for (long h = detail::highest_bit(boundary); h >= 0; h = detail::highest_bit(boundary)) {
        const auto it = pivots.find(h);
        if (it == pivots.end()) break;
        detail::xor_into(boundary, it->second.first);
        detail::xor_into(chain, it->second.second);
      }
      const long h = detail::highest_bit(boundary);
      if (h < 0) {
        cycles.push_back(std::move(chain));
      } else {
        pivots.emplace(h, std::make_pair(std::move(boundary), std::move(chain)));
      }
    }
  }

  // Boundary space B_p(K^j), spanned by boundaries of (p+1)-cells at level <= j.
  detail::EchelonBasis boundaries;
  detail::EchelonBasis sum;
  for (int pos : cs.members[static_cast<std::size_t>(p + 1)]) {
    if (f.simplices[pos].level > j) continue;
    detail::Bits v = detail::make_bits(p_count);
    for (int face : d.columns[pos]) detail::flip(v, static_cast<std::size_t>(cs.local[face]));
    boundaries.insert(v);
    sum.insert(std::move(v));
  }
  for (auto& z : cycles) sum.insert(z);
  // dim Z - dim(Z ∩ B) = dim(Z + B) - dim B
  return static_cast<int>(sum.rank()) - static_cast<int>(boundaries.rank());
}

}  // namespace detail

/// beta_p^{i,j}: number of p-classes present at level i that survive to level j.
/// Levels below 0 denote the empty complex.
inline int persistent_betti_oracle(const Filtration& f, int i, int j, int p) {
  if (p < 0 || p > 1) throw ContractError("persistent_betti_oracle supports p in {0, 1}");
  if (i > j) throw ContractError("persistent_betti_oracle needs i <= j");
  if (i < 0) return 0;
  return detail::persistent_betti(f, boundary_matrix(f), detail::chain_spaces(f), i, j, p);
}

/// (dim, birth level, death level or -1 for essential) with multiplicity.
using LevelPoint = std::tuple<int, int, int>;

/// Diagram multiset rebuilt from persistent Betti numbers:
/// mu^{i,j} = (b^{i,j-1} - b^{i,j}) - (b^{i-1,j-1} - b^{i-1,j}), and
/// essential classes mu^{i,inf} = b^{i,m} - b^{i-1,m}.
inline std::vector<LevelPoint> diagram_from_betti(const Filtration& f) {
  const int m = f.num_levels();
  const BoundaryMatrix d = boundary_matrix(f);
  const detail::ChainSpaces cs = detail::chain_spaces(f);
  std::vector<LevelPoint> out;
  for (int p = 0; p <= 1; ++p) {
    std::map<std::pair<int, int>, int> beta;
    const auto b = [&](int i, int j) {
      if (i < 0) return 0;
      const auto key = std::make_pair(i, j);
      const auto it = beta.find(key);
      if (it != beta.end()) return it->second;
      const int value = detail::persistent_betti(f, d, cs, i, j, p);
      beta.emplace(key, value);
      return value;
    };
    for (int i = 0; i <= m; ++i) {
      for (int j = i + 1; j <= m; ++j) {
        const int mu = (b(i, j - 1) - b(i, j)) - (b(i - 1, j - 1) - b(i - 1, j));
        if (mu < 0) throw IntegrityError("negative persistence multiplicity");
        for (int c = 0; c < mu; ++c) out.emplace_back(p, i, j);
      }
      const int essential = b(i, m) - b(i - 1, m);
      for (int c = 0; c < essential; ++c) out.emplace_back(p, i, -1);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Level points of a computed diagram, sorted, for comparison with the oracle.
inline std::vector<LevelPoint> level_points(const PersistenceDiagram& dgm) {
  std::vector<LevelPoint> out;
  for (const auto& p : dgm.pairs) out.emplace_back(p.dim, p.birth_level, p.death_level);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace toporeg
