#pragma once

// Scrabble spelling: the action set is a set of physical tiles, duplicates
// included, and an image shows the letters of a word in order. Duplicate
// letters are visually identical, so any tile carrying the letter is correct.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "permseq/dataset.hpp"

namespace permseq::scrabble {

inline constexpr std::size_t kAlphabet = 26;
inline constexpr std::size_t kMinWord = 3;
inline constexpr std::size_t kMaxWord = 6;
inline constexpr std::size_t kRasterDim = kMaxWord * kAlphabet;

// Tiles per letter, A..Z, in the standard English set without blanks.
inline constexpr std::array<int, kAlphabet> kLetterCounts = {9, 2, 2, 4, 12, 2, 3, 2, 9, 1, 1, 4, 2,
                                                            6, 8, 2, 1, 6, 4, 6, 4, 2, 2, 1, 2, 1};

struct Tile {
  int id = 0;
  char letter = 'A';
  friend bool operator==(const Tile&, const Tile&) = default;
};

// Action index i refers to tiles[i]; tile ids keep the full-set numbering.
struct TileSet {
  std::vector<Tile> tiles;

  std::size_t size() const noexcept { return tiles.size(); }
  std::size_t count(char letter) const;
  friend bool operator==(const TileSet&, const TileSet&) = default;
};

// 98 tiles, ids assigned letter-major (all A tiles first).
TileSet standard_tileset();

// Seeded uniform subset without replacement, kept in tile-id order.
TileSet subset_tileset(std::size_t size, std::uint64_t seed);

struct WordTask {
  // Action indices into the tile set.
  std::vector<int> tiles;
  std::vector<double> raster;
};

struct WordSplit {
  std::vector<WordTask> train;
  std::vector<WordTask> test;
};

// 6 positions x 26 one-hot letter channels; rows past the word are zero.
std::vector<double> render_word(const TileSet& tileset, std::span<const int> tiles);

// Word lengths uniform over 3..6, tiles distinct within a word. Test words
// never repeat a training tile sequence.
WordSplit sample_words(const TileSet& tileset, std::size_t n_train, std::size_t n_test, std::uint64_t seed);

double spelling_precision(std::span<const int> predicted, std::span<const int> truth, const TileSet& tileset);

struct ConfusionReport {
  // counts[true_letter][predicted_letter] over aligned positions.
  std::array<std::array<std::size_t, kAlphabet>, kAlphabet> counts{};
  // Missing predicted positions (prediction shorter than the word).
  std::array<std::size_t, kAlphabet> missing{};
  // Index r: words in which the most frequent letter appears r+1 times.
  std::vector<std::size_t> bucket_positions;
  std::vector<std::size_t> bucket_errors;
};

ConfusionReport confusion_matrix(std::span<const std::vector<int>> predictions,
                                 std::span<const std::vector<int>> truths, const TileSet& tileset);

Dataset to_dataset(const TileSet& tileset, const std::vector<WordTask>& words);

}  // namespace permseq::scrabble
