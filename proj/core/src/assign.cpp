#include "permseq/assign.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace permseq {

CostMatrix::CostMatrix(std::size_t n, std::vector<double> entries) : n_(n), entries_(std::move(entries)) {
  if (n_ < 1 || n_ > kMaxAssignmentSize) {
    throw std::invalid_argument("cost matrix side must be in [1, 128], got " + std::to_string(n_));
  }
  if (entries_.size() != n_ * n_) throw std::invalid_argument("cost matrix is not square");
  for (double v : entries_) {
    if (!std::isfinite(v)) throw std::domain_error("cost matrix has a non-finite entry");
  }
}

CostMatrix::CostMatrix(const Tensor& square)
    : CostMatrix(square.rank() == 2 && square.dim(0) == square.dim(1)
                     ? square.dim(0)
                     : throw std::invalid_argument("cost matrix must be square, got " + to_string(square.shape())),
                 std::vector<double>(square.values().begin(), square.values().end())) {}

double assignment_cost(const CostMatrix& costs, const std::vector<std::size_t>& perm) {
  double total = 0.0;
  for (std::size_t r = 0; r < perm.size(); ++r) total += costs(r, perm[r]);
  return total;
}

bool is_permutation(const std::vector<std::size_t>& perm, std::size_t n) {
  if (perm.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (std::size_t c : perm) {
    if (c >= n || seen[c]) return false;
    seen[c] = true;
  }
  return true;
}

// Shortest augmenting path with row/column potentials (Kuhn-Munkres,
// Jonker-Volgenant style). Index 0 is a sentinel column; rows and columns are
// 1-based internally.
Assignment hungarian(const CostMatrix& costs) {
  const std::size_t n = costs.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> row_pot(n + 1, 0.0), col_pot(n + 1, 0.0);
  std::vector<std::size_t> row_of_col(n + 1, 0), way(n + 1, 0);

  for (std::size_t row = 1; row <= n; ++row) {
    row_of_col[0] = row;
    std::size_t col0 = 0;
    std::vector<double> min_slack(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[col0] = true;
      const std::size_t r0 = row_of_col[col0];
      double delta = inf;
      std::size_t col1 = 0;
      for (std::size_t c = 1; c <= n; ++c) {
        if (used[c]) continue;
        const double reduced = costs(r0 - 1, c - 1) - row_pot[r0] - col_pot[c];
        if (reduced < min_slack[c]) {
          min_slack[c] = reduced;
          way[c] = col0;
        }
        if (min_slack[c] < delta) {
          delta = min_slack[c];
          col1 = c;
        }
      }
      for (std::size_t c = 0; c <= n; ++c) {
        if (used[c]) {
          row_pot[row_of_col[c]] += delta;
          col_pot[c] -= delta;
        } else {
          min_slack[c] -= delta;
        }
      }
      col0 = col1;
    } while (row_of_col[col0] != 0);
    do {
      const std::size_t prev = way[col0];
      row_of_col[col0] = row_of_col[prev];
      col0 = prev;
    } while (col0 != 0);
  }

  Assignment result;
  result.perm.assign(n, 0);
  for (std::size_t c = 1; c <= n; ++c) result.perm[row_of_col[c] - 1] = c - 1;
  result.cost = assignment_cost(costs, result.perm);
  return result;
}

Assignment brute_force_assignment(const CostMatrix& costs) {
  const std::size_t n = costs.size();
  if (n > kMaxBruteForceSize) {
    throw std::invalid_argument("brute_force_assignment supports n <= 8, got " + std::to_string(n));
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Assignment best{perm, assignment_cost(costs, perm)};
  while (std::next_permutation(perm.begin(), perm.end())) {
    const double cost = assignment_cost(costs, perm);
    // Strict comparison keeps the lexicographically first minimiser.
    if (cost < best.cost) best = {perm, cost};
  }
  return best;
}

}  // namespace permseq
