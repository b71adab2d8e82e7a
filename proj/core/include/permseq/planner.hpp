#pragma once

// Repair-based disassembly planning with the support simulator in the loop:
// run an initial extraction order, and whenever a step collapses the puzzle,
// swap that action with a random later one and resume from the valid prefix.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "permseq/soma.hpp"

namespace permseq::planner {

inline constexpr std::size_t kDefaultIterationCap = 500;

struct PlanResult {
  std::vector<int> order;
  // Collapse events observed before success (one restart each).
  std::size_t iterations = 0;
  bool succeeded = false;
};

PlanResult backtrack_plan(std::span<const int> init_order, const soma::PuzzleState& state, std::uint64_t seed,
                          std::size_t iteration_cap = kDefaultIterationCap);

// Initial extraction orders for a list of puzzles, one per puzzle.
struct Initializer {
  std::string name;
  std::vector<std::vector<int>> orders;
};

struct InitializerStats {
  std::string name;
  double mean_iterations = 0.0;
  // Population standard deviation over all runs.
  double std_iterations = 0.0;
  // Percentage of puzzles whose initial order collapses when replayed as is.
  double initial_collapse_pct = 0.0;
  std::size_t runs = 0;
  std::size_t failures = 0;
  std::vector<std::size_t> iterations;
};

// Plans every puzzle once per seed from each initializer's orders.
std::vector<InitializerStats> warm_start_comparison(std::span<const Initializer> initializers,
                                                    std::span<const soma::SomaSolution> puzzles,
                                                    std::span<const std::uint64_t> seeds,
                                                    std::size_t iteration_cap = kDefaultIterationCap);

// Seeded uniformly random extraction orders.
Initializer random_initializer(std::span<const soma::SomaSolution> puzzles, std::uint64_t seed);
Initializer oracle_initializer(std::span<const soma::SomaSolution> puzzles);

// Rows: initializer,mean_iters,std_iters,initial_collapse_pct
std::string comparison_csv(std::span<const InitializerStats> stats);

}  // namespace permseq::planner
