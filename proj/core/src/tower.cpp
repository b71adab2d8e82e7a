#include "permseq/tower.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>
#include <string>

#include "permseq/random.hpp"

namespace permseq::tower {

std::array<double, 3> rgb(Colour colour) {
  switch (colour) {
    case Colour::kBlue: return {0.0, 0.0, 1.0};
    case Colour::kYellow: return {1.0, 1.0, 0.0};
    case Colour::kRed: return {1.0, 0.0, 0.0};
    case Colour::kGreen: return {0.0, 1.0, 0.0};
    case Colour::kMagenta: return {1.0, 0.0, 1.0};
    case Colour::kCyan: return {0.0, 1.0, 1.0};
  }
  return {0.0, 0.0, 0.0};
}

std::string colour_name(Colour colour) {
  switch (colour) {
    case Colour::kBlue: return "blue";
    case Colour::kYellow: return "yellow";
    case Colour::kRed: return "red";
    case Colour::kGreen: return "green";
    case Colour::kMagenta: return "magenta";
    case Colour::kCyan: return "cyan";
  }
  return "?";
}

BlockSet BlockSet::standard() {
  return {{{0, Colour::kBlue}, {1, Colour::kBlue}, {2, Colour::kYellow}, {3, Colour::kYellow},
           {4, Colour::kRed}, {5, Colour::kRed}}};
}

BlockSet BlockSet::unique() {
  return {{{0, Colour::kBlue}, {1, Colour::kYellow}, {2, Colour::kRed}, {3, Colour::kGreen},
           {4, Colour::kMagenta}, {5, Colour::kCyan}}};
}

Colour BlockSet::colour_of(int block_id) const {
  for (const Block& b : blocks) {
    if (b.id == block_id) return b.colour;
  }
  throw std::out_of_range("unknown block id " + std::to_string(block_id));
}

std::vector<double> render_tower(const BlockSet& blocks, std::span<const int> sequence,
                                 const std::optional<RenderNoise>& noise) {
  const std::size_t height = blocks.size();
  if (sequence.size() > height) throw std::invalid_argument("render_tower: tower taller than the block set");
  std::vector<double> raster(height * 3, 0.0);
  for (std::size_t h = 0; h < sequence.size(); ++h) {
    const auto c = rgb(blocks.colour_of(sequence[h]));
    std::copy(c.begin(), c.end(), raster.begin() + static_cast<std::ptrdiff_t>(h * 3));
  }
  if (noise) {
    Rng rng(noise->seed);
    for (double& v : raster) v = std::clamp(v + uniform_in(rng, -noise->amplitude, noise->amplitude), 0.0, 1.0);
  }
  return raster;
}

std::vector<TowerTask> enumerate_towers(const BlockSet& blocks, std::span<const std::size_t> lengths) {
  if (lengths.empty()) throw std::invalid_argument("enumerate_towers: empty length set");
  for (std::size_t k : lengths) {
    if (k < 1 || k > blocks.size()) {
      throw std::invalid_argument("enumerate_towers: length " + std::to_string(k) + " outside [1, " +
                                  std::to_string(blocks.size()) + "]");
    }
  }
  std::vector<int> ids;
  for (const Block& b : blocks.blocks) ids.push_back(b.id);
  std::sort(ids.begin(), ids.end());
  const std::size_t longest = *std::max_element(lengths.begin(), lengths.end());
  auto wanted = [&](std::size_t k) { return std::find(lengths.begin(), lengths.end(), k) != lengths.end(); };

  std::vector<TowerTask> out;
  std::vector<int> prefix;
  std::vector<bool> used(ids.size(), false);
  // Emitting a prefix before extending it yields lexicographic order.
  std::function<void()> extend = [&]() {
    if (!prefix.empty() && wanted(prefix.size())) out.push_back({prefix, render_tower(blocks, prefix)});
    if (prefix.size() == longest) return;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (used[i]) continue;
      used[i] = true;
      prefix.push_back(ids[i]);
      extend();
      prefix.pop_back();
      used[i] = false;
    }
  };
  extend();
  return out;
}

std::vector<TowerTask> sample_demos(const BlockSet& blocks, std::size_t n, std::span<const std::size_t> lengths,
                                    std::uint64_t seed) {
  std::vector<TowerTask> all = enumerate_towers(blocks, lengths);
  if (n > all.size()) {
    throw std::invalid_argument("sample_demos: requested " + std::to_string(n) + " demos but only " +
                                std::to_string(all.size()) + " towers exist");
  }
  Rng rng(seed);
  shuffle(std::span<TowerTask>(all), rng);
  all.resize(n);
  return all;
}

double colour_precision(std::span<const int> predicted, std::span<const int> truth, const BlockSet& blocks) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("colour_precision: length mismatch");
  if (truth.empty()) throw std::invalid_argument("colour_precision: empty sequences");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (blocks.colour_of(predicted[i]) == blocks.colour_of(truth[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

Dataset to_dataset(const std::string& env, const BlockSet& blocks, const std::vector<TowerTask>& tasks,
                   bool variable_length) {
  Dataset d;
  d.env = env;
  d.n_actions = blocks.size();
  d.max_len = blocks.size();
  d.variable_length = variable_length;
  std::vector<Colour> seen;
  for (const Block& b : blocks.blocks) {
    auto it = std::find(seen.begin(), seen.end(), b.colour);
    if (it == seen.end()) {
      seen.push_back(b.colour);
      d.symbol_names.push_back(colour_name(b.colour));
      it = seen.end() - 1;
    }
    d.action_symbols.push_back(static_cast<int>(it - seen.begin()));
  }
  int id = 0;
  for (const TowerTask& t : tasks) d.items.push_back({id++, t.raster, t.sequence, t.sequence.size()});
  return d;
}

}  // namespace permseq::tower
