#pragma once

// Balanced linear assignment: an O(n^3) Hungarian solver and an exhaustive
// oracle for small n.

#include <cstddef>
#include <vector>

#include "permseq/diffcore.hpp"

namespace permseq {

inline constexpr std::size_t kMaxAssignmentSize = 128;
inline constexpr std::size_t kMaxBruteForceSize = 8;

// Square matrix of finite costs, row-major.
class CostMatrix {
 public:
  CostMatrix(std::size_t n, std::vector<double> entries);
  explicit CostMatrix(const Tensor& square);

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t r, std::size_t c) const { return entries_[r * n_ + c]; }

 private:
  std::size_t n_;
  std::vector<double> entries_;
};

struct Assignment {
  // perm[row] = column assigned to that row.
  std::vector<std::size_t> perm;
  double cost = 0.0;
};

// Sum of C[i][perm[i]] accumulated in row order.
double assignment_cost(const CostMatrix& costs, const std::vector<std::size_t>& perm);

Assignment hungarian(const CostMatrix& costs);

// Lexicographically smallest minimiser over all n! permutations; n <= 8.
Assignment brute_force_assignment(const CostMatrix& costs);

bool is_permutation(const std::vector<std::size_t>& perm, std::size_t n);

}  // namespace permseq
