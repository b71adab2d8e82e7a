#include "permseq/scrabble.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>

#include "permseq/random.hpp"

namespace permseq::scrabble {

namespace {

std::size_t letter_index(char letter) { return static_cast<std::size_t>(letter - 'A'); }

std::size_t max_letter_multiplicity(const TileSet& tileset, std::span<const int> tiles) {
  std::array<std::size_t, kAlphabet> counts{};
  std::size_t best = 0;
  for (int t : tiles) best = std::max(best, ++counts[letter_index(tileset.tiles.at(t).letter)]);
  return best;
}

}  // namespace

std::size_t TileSet::count(char letter) const {
  return static_cast<std::size_t>(std::count_if(tiles.begin(), tiles.end(), [&](const Tile& t) { return t.letter == letter; }));
}

TileSet standard_tileset() {
  TileSet set;
  int id = 0;
  for (std::size_t l = 0; l < kAlphabet; ++l) {
    for (int c = 0; c < kLetterCounts[l]; ++c) set.tiles.push_back({id++, static_cast<char>('A' + l)});
  }
  return set;
}

TileSet subset_tileset(std::size_t size, std::uint64_t seed) {
  TileSet full = standard_tileset();
  if (size < 1 || size > full.size()) {
    throw std::invalid_argument("subset_tileset: size must be in [1, 98], got " + std::to_string(size));
  }
  if (size == full.size()) return full;
  Rng rng(seed);
  shuffle(std::span<Tile>(full.tiles), rng);
  full.tiles.resize(size);
  std::sort(full.tiles.begin(), full.tiles.end(), [](const Tile& a, const Tile& b) { return a.id < b.id; });
  return full;
}

std::vector<double> render_word(const TileSet& tileset, std::span<const int> tiles) {
  if (tiles.size() > kMaxWord) throw std::invalid_argument("render_word: word longer than 6 tiles");
  std::vector<double> raster(kRasterDim, 0.0);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    raster[i * kAlphabet + letter_index(tileset.tiles.at(static_cast<std::size_t>(tiles[i])).letter)] = 1.0;
  }
  return raster;
}

WordSplit sample_words(const TileSet& tileset, std::size_t n_train, std::size_t n_test, std::uint64_t seed) {
  if (tileset.size() < kMaxWord) {
    throw std::invalid_argument("sample_words: tile set of " + std::to_string(tileset.size()) +
                                " is smaller than the maximum word length");
  }
  std::vector<int> pool(tileset.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = static_cast<int>(i);

  auto draw = [&](Rng& rng) {
    const std::size_t length = kMinWord + uniform_index(rng, kMaxWord - kMinWord + 1);
    // Partial Fisher-Yates: first `length` entries are a uniform draw without replacement.
    for (std::size_t i = 0; i < length; ++i) std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
    std::vector<int> tiles(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(length));
    return WordTask{tiles, render_word(tileset, tiles)};
  };

  WordSplit split;
  std::set<std::vector<int>> train_words;
  Rng train_rng(mix_seed(seed, 1));
  for (std::size_t i = 0; i < n_train; ++i) {
    split.train.push_back(draw(train_rng));
    train_words.insert(split.train.back().tiles);
  }
  Rng test_rng(mix_seed(seed, 2));
  while (split.test.size() < n_test) {
    WordTask w = draw(test_rng);
    if (!train_words.contains(w.tiles)) split.test.push_back(std::move(w));
  }
  return split;
}

double spelling_precision(std::span<const int> predicted, std::span<const int> truth, const TileSet& tileset) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("spelling_precision: length mismatch");
  if (truth.empty()) throw std::invalid_argument("spelling_precision: empty sequences");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (tileset.tiles.at(static_cast<std::size_t>(predicted[i])).letter ==
        tileset.tiles.at(static_cast<std::size_t>(truth[i])).letter) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

ConfusionReport confusion_matrix(std::span<const std::vector<int>> predictions,
                                 std::span<const std::vector<int>> truths, const TileSet& tileset) {
  if (predictions.size() != truths.size()) throw std::invalid_argument("confusion_matrix: prediction count mismatch");
  ConfusionReport report;
  report.bucket_positions.assign(kMaxWord, 0);
  report.bucket_errors.assign(kMaxWord, 0);
  for (std::size_t w = 0; w < truths.size(); ++w) {
    const auto& truth = truths[w];
    const auto& pred = predictions[w];
    const std::size_t bucket = max_letter_multiplicity(tileset, truth) - 1;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const std::size_t t = letter_index(tileset.tiles.at(static_cast<std::size_t>(truth[i])).letter);
      ++report.bucket_positions[bucket];
      if (i >= pred.size()) {
        ++report.missing[t];
        ++report.bucket_errors[bucket];
        continue;
      }
      const std::size_t p = letter_index(tileset.tiles.at(static_cast<std::size_t>(pred[i])).letter);
      ++report.counts[t][p];
      if (p != t) ++report.bucket_errors[bucket];
    }
  }
  return report;
}

Dataset to_dataset(const TileSet& tileset, const std::vector<WordTask>& words) {
  Dataset d;
  d.env = "scrabble";
  d.n_actions = tileset.size();
  d.max_len = kMaxWord;
  d.variable_length = true;
  for (std::size_t l = 0; l < kAlphabet; ++l) d.symbol_names.emplace_back(1, static_cast<char>('A' + l));
  for (const Tile& t : tileset.tiles) d.action_symbols.push_back(static_cast<int>(letter_index(t.letter)));
  int id = 0;
  for (const WordTask& w : words) d.items.push_back({id++, w.raster, w.tiles, w.tiles.size()});
  return d;
}

}  // namespace permseq::scrabble
