#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace permseq {

// One demonstration: a flattened raster and the action sequence that
// reproduces (or takes apart) the depicted scene.
struct TaskInstance {
  int task_id = 0;
  std::vector<double> raster;
  std::vector<int> actions;
  std::size_t length = 0;

  friend bool operator==(const TaskInstance&, const TaskInstance&) = default;
};

struct Dataset {
  std::string env;
  std::size_t n_actions = 0;
  std::size_t max_len = 0;
  bool variable_length = false;
  // Symbol shown for each action (block colour, tile letter, piece name);
  // precision metrics compare symbols, not action ids.
  std::vector<int> action_symbols;
  std::vector<std::string> symbol_names;
  std::vector<TaskInstance> items;

  std::size_t raster_dim() const { return items.empty() ? 0 : items.front().raster.size(); }
  Dataset subset(std::span<const std::size_t> indices) const;
  // Throws if any record breaks the action/length/raster invariants.
  void validate() const;
};

// Fraction of positions < true length whose predicted symbol matches.
// Positions the prediction does not reach count as misses.
double symbol_precision(std::span<const int> predicted, std::span<const int> truth,
                        std::span<const int> action_symbols);

// Fraction of sequences that use some action id more than once.
double repetition_stats(std::span<const std::vector<int>> predictions);
bool has_repetition(std::span<const int> sequence);

}  // namespace permseq
