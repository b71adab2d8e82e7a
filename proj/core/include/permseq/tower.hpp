#pragma once

// Tower stacking: pick blocks from a known set and place each on top of the
// previous one. Images are colour strips, one RGB row per tower level, so two
// towers with the same colour sequence render identically.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "permseq/dataset.hpp"

namespace permseq::tower {

enum class Colour { kBlue, kYellow, kRed, kGreen, kMagenta, kCyan };

std::array<double, 3> rgb(Colour colour);
std::string colour_name(Colour colour);

struct Block {
  int id = 0;
  Colour colour = Colour::kBlue;
};

struct BlockSet {
  std::vector<Block> blocks;

  // Two blue, two yellow, two red.
  static BlockSet standard();
  // Six distinct colours.
  static BlockSet unique();

  std::size_t size() const noexcept { return blocks.size(); }
  Colour colour_of(int block_id) const;
};

struct TowerTask {
  // Block ids bottom to top.
  std::vector<int> sequence;
  std::vector<double> raster;
};

struct RenderNoise {
  double amplitude = 0.05;
  std::uint64_t seed = 0;
};

// max_height x 3 floats; rows at and above the tower height are zero.
std::vector<double> render_tower(const BlockSet& blocks, std::span<const int> sequence,
                                 const std::optional<RenderNoise>& noise = std::nullopt);

// Every ordered selection of distinct blocks whose length is in `lengths`,
// in lexicographic order of the block id sequences.
std::vector<TowerTask> enumerate_towers(const BlockSet& blocks, std::span<const std::size_t> lengths);

// n distinct towers drawn uniformly without replacement from the enumeration.
std::vector<TowerTask> sample_demos(const BlockSet& blocks, std::size_t n, std::span<const std::size_t> lengths,
                                    std::uint64_t seed);

double colour_precision(std::span<const int> predicted, std::span<const int> truth, const BlockSet& blocks);

Dataset to_dataset(const std::string& env, const BlockSet& blocks, const std::vector<TowerTask>& tasks,
                   bool variable_length);

}  // namespace permseq::tower
