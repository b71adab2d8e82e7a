#include "permseq/dataset.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace permseq {

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out = *this;
  out.items.clear();
  out.items.reserve(indices.size());
  for (std::size_t i : indices) out.items.push_back(items.at(i));
  return out;
}

void Dataset::validate() const {
  if (n_actions == 0 || max_len == 0) throw std::invalid_argument("dataset '" + env + "' has empty action space");
  if (action_symbols.size() != n_actions) throw std::invalid_argument("dataset '" + env + "' symbol table size mismatch");
  const std::size_t dim = raster_dim();
  for (const TaskInstance& t : items) {
    const std::string where = "dataset '" + env + "' task " + std::to_string(t.task_id);
    if (t.raster.size() != dim) throw std::invalid_argument(where + ": raster size differs");
    if (t.length != t.actions.size() || t.length == 0 || t.length > max_len) {
      throw std::invalid_argument(where + ": bad length");
    }
    if (!variable_length && t.length != max_len) throw std::invalid_argument(where + ": length must equal max_len");
    for (int a : t.actions) {
      if (a < 0 || static_cast<std::size_t>(a) >= n_actions) throw std::invalid_argument(where + ": action out of range");
    }
    if (has_repetition(t.actions)) throw std::invalid_argument(where + ": repeated action");
  }
}

double symbol_precision(std::span<const int> predicted, std::span<const int> truth,
                        std::span<const int> action_symbols) {
  if (truth.empty()) throw std::invalid_argument("symbol_precision: empty ground truth");
  std::size_t hits = 0;
  const std::size_t overlap = std::min(predicted.size(), truth.size());
  for (std::size_t i = 0; i < overlap; ++i) {
    if (action_symbols[static_cast<std::size_t>(predicted[i])] == action_symbols[static_cast<std::size_t>(truth[i])]) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

bool has_repetition(std::span<const int> sequence) {
  std::vector<int> sorted(sequence.begin(), sequence.end());
  std::sort(sorted.begin(), sorted.end());
  return std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
}

double repetition_stats(std::span<const std::vector<int>> predictions) {
  if (predictions.empty()) throw std::invalid_argument("repetition_stats: empty prediction set");
  std::size_t repeats = 0;
  for (const auto& seq : predictions) repeats += has_repetition(seq) ? 1 : 0;
  return static_cast<double>(repeats) / static_cast<double>(predictions.size());
}

}  // namespace permseq
