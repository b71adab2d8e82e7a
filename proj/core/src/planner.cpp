#include "permseq/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "permseq/random.hpp"

namespace permseq::planner {

PlanResult backtrack_plan(std::span<const int> init_order, const soma::PuzzleState& state, std::uint64_t seed,
                          std::size_t iteration_cap) {
  std::vector<int> present;
  for (const soma::Placement& p : state.remaining) present.push_back(p.piece_id);
  std::vector<int> sorted_init(init_order.begin(), init_order.end());
  std::sort(present.begin(), present.end());
  std::sort(sorted_init.begin(), sorted_init.end());
  if (present != sorted_init) throw std::invalid_argument("backtrack_plan: init order is not a permutation of the parts");

  Rng rng(seed);
  PlanResult result;
  result.order.assign(init_order.begin(), init_order.end());
  const std::size_t n = result.order.size();
  soma::PuzzleState current = state;
  std::size_t pos = 0;
  while (pos < n) {
    soma::RemovalResult step = soma::remove_part(current, result.order[pos]);
    if (!step.collapsed) {
      current = std::move(step.state);
      ++pos;
      continue;
    }
    ++result.iterations;
    if (result.iterations >= iteration_cap || pos + 1 >= n) return result;
    const std::size_t later = pos + 1 + uniform_index(rng, n - pos - 1);
    std::swap(result.order[pos], result.order[later]);
  }
  result.succeeded = true;
  return result;
}

std::vector<InitializerStats> warm_start_comparison(std::span<const Initializer> initializers,
                                                    std::span<const soma::SomaSolution> puzzles,
                                                    std::span<const std::uint64_t> seeds, std::size_t iteration_cap) {
  std::vector<InitializerStats> out;
  for (const Initializer& init : initializers) {
    if (init.orders.size() != puzzles.size()) {
      throw std::invalid_argument("warm_start_comparison: initializer '" + init.name + "' has " +
                                  std::to_string(init.orders.size()) + " orders for " +
                                  std::to_string(puzzles.size()) + " puzzles");
    }
    InitializerStats stats;
    stats.name = init.name;
    std::size_t initial_collapses = 0;
    for (std::size_t i = 0; i < puzzles.size(); ++i) {
      const auto state = soma::PuzzleState::from(puzzles[i].placements);
      if (!soma::replays_collapse_free(state, init.orders[i])) ++initial_collapses;
      for (std::uint64_t seed : seeds) {
        const PlanResult r = backtrack_plan(init.orders[i], state, mix_seed(seed, i), iteration_cap);
        stats.iterations.push_back(r.iterations);
        if (!r.succeeded) ++stats.failures;
      }
    }
    stats.runs = stats.iterations.size();
    if (stats.runs > 0) {
      const double total = std::accumulate(stats.iterations.begin(), stats.iterations.end(), 0.0);
      stats.mean_iterations = total / static_cast<double>(stats.runs);
      double spread = 0.0;
      for (std::size_t it : stats.iterations) {
        const double d = static_cast<double>(it) - stats.mean_iterations;
        spread += d * d;
      }
      stats.std_iterations = std::sqrt(spread / static_cast<double>(stats.runs));
    }
    if (!puzzles.empty()) {
      stats.initial_collapse_pct = 100.0 * static_cast<double>(initial_collapses) / static_cast<double>(puzzles.size());
    }
    out.push_back(std::move(stats));
  }
  return out;
}

Initializer random_initializer(std::span<const soma::SomaSolution> puzzles, std::uint64_t seed) {
  Initializer init{"random", {}};
  Rng rng(seed);
  for (const soma::SomaSolution& s : puzzles) {
    std::vector<int> order;
    for (const soma::Placement& p : s.placements) order.push_back(p.piece_id);
    std::sort(order.begin(), order.end());
    shuffle(std::span<int>(order), rng);
    init.orders.push_back(std::move(order));
  }
  return init;
}

Initializer oracle_initializer(std::span<const soma::SomaSolution> puzzles) {
  Initializer init{"oracle", {}};
  for (const soma::SomaSolution& s : puzzles) init.orders.push_back(s.label_order);
  return init;
}

std::string comparison_csv(std::span<const InitializerStats> stats) {
  std::string out = "initializer,mean_iters,std_iters,initial_collapse_pct\n";
  char line[256];
  for (const InitializerStats& s : stats) {
    std::snprintf(line, sizeof line, "%s,%.6f,%.6f,%.6f\n", s.name.c_str(), s.mean_iterations, s.std_iterations,
                  s.initial_collapse_pct);
    out += line;
  }
  return out;
}

}  // namespace permseq::planner
