#pragma once

#include <toporeg/errors.hpp>
#include <toporeg/types.hpp>

#include <limits>
#include <vector>

namespace toporeg {

/// Minimum-cost assignment on a rows x cols cost matrix (Kuhn-Munkres with
/// potentials, O(n^2 m)).
///
/// Returns, for every row, the column assigned to it. When rows > cols the
/// surplus rows get -1. Every column is used at most once.
inline std::vector<int> hungarian_assignment(const Matrix& cost) {
  const bool transposed = cost.rows() > cost.cols();
  const Matrix a = transposed ? Matrix(cost.transpose()) : cost;
  if (!a.allFinite()) throw ContractError("hungarian_assignment: costs must be finite");
  const auto n = static_cast<int>(a.rows());
  const auto m = static_cast<int>(a.cols());
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // 1-based potentials; column 0 is a virtual source.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> match_of_col(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match_of_col[0] = i;
    int j0 = 0;
    std::vector<double> min_slack(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match_of_col[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double slack = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (slack < min_slack[j]) {
          min_slack[j] = slack;
          way[j] = j0;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      j0 = j1;
    } while (match_of_col[j0] != 0);
    do {
      const int j1 = way[j0];
      match_of_col[j0] = match_of_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j) {
    if (match_of_col[j] != 0) row_to_col[match_of_col[j] - 1] = j - 1;
  }
  if (!transposed) return row_to_col;

  std::vector<int> result(static_cast<std::size_t>(cost.rows()), -1);
  for (int r = 0; r < n; ++r) result[row_to_col[r]] = r;
  return result;
}

}  // namespace toporeg
