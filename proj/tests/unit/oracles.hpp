#pragma once

// Reference computations written independently of the library code they
// check. Kept deliberately naive.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

// Minimum of sum_i C[i][p(i)] over all permutations, by std::next_permutation.
inline double min_assignment_cost(const std::vector<double>& c, std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) cost += c[i * n + p[i]];
    best = std::min(best, cost);
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

// Best and second-best permutation scores (maximisation) for gap checks.
inline std::pair<std::vector<std::size_t>, double> best_perm_with_gap(const std::vector<double>& x, std::size_t n) {
  std::vector<std::size_t> p(n), best;
  std::iota(p.begin(), p.end(), std::size_t{0});
  double top = -std::numeric_limits<double>::infinity(), second = top;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i * n + p[i]];
    if (s > top) {
      second = top;
      top = s;
      best = p;
    } else if (s > second) {
      second = s;
    }
  } while (std::next_permutation(p.begin(), p.end()));
  return {best, top - second};
}

// Plain exp-domain Sinkhorn on a row-major n x n matrix.
inline std::vector<double> sinkhorn_reference(std::vector<double> x, std::size_t n, double tau, int iters) {
  for (double& v : x) v = std::exp(v / tau);
  for (int l = 0; l < iters; ++l) {
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < n; ++c) s += x[r * n + c];
      for (std::size_t c = 0; c < n; ++c) x[r * n + c] /= s;
    }
    for (std::size_t c = 0; c < n; ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += x[r * n + c];
      for (std::size_t r = 0; r < n; ++r) x[r * n + c] /= s;
    }
  }
  return x;
}

// Number of ordered selections of k distinct items out of n.
inline std::size_t falling_factorial(std::size_t n, std::size_t k) {
  std::size_t out = 1;
  for (std::size_t i = 0; i < k; ++i) out *= n - i;
  return out;
}

// All ordered selections of distinct ids 0..n-1 with length k, via
// nested counting over n^k tuples and rejecting repeats.
inline std::vector<std::vector<int>> brute_force_sequences(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> digits(static_cast<std::size_t>(k), 0);
  while (true) {
    std::vector<int> sorted = digits;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end()) out.push_back(digits);
    int pos = k - 1;
    while (pos >= 0 && ++digits[static_cast<std::size_t>(pos)] == n) digits[static_cast<std::size_t>(pos--)] = 0;
    if (pos < 0) break;
  }
  return out;
}

}  // namespace oracle
