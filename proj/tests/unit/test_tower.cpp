#include <algorithm>
#include <set>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "permseq/dataset.hpp"
#include "permseq/experiments.hpp"
#include "permseq/tower.hpp"

using namespace permseq;
using namespace permseq::tower;

namespace {

std::vector<std::vector<int>> sequences_of(const std::vector<TowerTask>& tasks) {
  std::vector<std::vector<int>> out;
  for (const TowerTask& t : tasks) out.push_back(t.sequence);
  return out;
}

std::vector<Colour> colours_of(const BlockSet& blocks, const std::vector<int>& seq) {
  std::vector<Colour> out;
  for (int b : seq) out.push_back(blocks.colour_of(b));
  return out;
}

}  // namespace

TEST_CASE("enumeration counts") {
  const std::vector<std::size_t> six = {6};
  const std::vector<std::size_t> two_to_six = {2, 3, 4, 5, 6};
  CHECK(enumerate_towers(BlockSet::standard(), six).size() == 720);
  CHECK(enumerate_towers(BlockSet::unique(), two_to_six).size() == 1950);

  BlockSet pair{{{0, Colour::kRed}, {1, Colour::kBlue}}};
  const std::vector<std::size_t> two = {2};
  CHECK(sequences_of(enumerate_towers(pair, two)) == std::vector<std::vector<int>>{{0, 1}, {1, 0}});

  const std::vector<std::size_t> none;
  CHECK_THROWS_AS(enumerate_towers(pair, none), std::invalid_argument);
  const std::vector<std::size_t> too_tall = {3};
  CHECK_THROWS_AS(enumerate_towers(pair, too_tall), std::invalid_argument);
  const std::vector<std::size_t> zero = {0};
  CHECK_THROWS_AS(enumerate_towers(pair, zero), std::invalid_argument);
}

TEST_CASE("enumeration matches an independent brute-force generator") {
  for (int n = 1; n <= 6; ++n) {
    BlockSet blocks;
    for (int i = 0; i < n; ++i) blocks.blocks.push_back({i, Colour::kRed});
    std::vector<std::size_t> lengths;
    std::vector<std::vector<int>> expected;
    std::size_t expected_count = 0;
    for (int k = 1; k <= n; ++k) {
      lengths.push_back(static_cast<std::size_t>(k));
      for (auto& s : oracle::brute_force_sequences(n, k)) expected.push_back(std::move(s));
      expected_count += oracle::falling_factorial(static_cast<std::size_t>(n), static_cast<std::size_t>(k));
    }
    std::sort(expected.begin(), expected.end());
    const auto got = sequences_of(enumerate_towers(blocks, lengths));
    CHECK(got.size() == expected_count);
    CHECK(got == expected);
  }
}

TEST_CASE("every enumerated task satisfies the task invariants") {
  const std::vector<std::size_t> lengths = {2, 3, 4, 5, 6};
  for (const BlockSet& blocks : {BlockSet::standard(), BlockSet::unique()}) {
    for (const TowerTask& t : enumerate_towers(blocks, lengths)) {
      REQUIRE_FALSE(has_repetition(t.sequence));
      REQUIRE(t.raster.size() == 18);
      for (std::size_t h = 0; h < 6; ++h) {
        const bool nonzero = std::any_of(t.raster.begin() + static_cast<std::ptrdiff_t>(h * 3),
                                         t.raster.begin() + static_cast<std::ptrdiff_t>(h * 3 + 3),
                                         [](double v) { return v != 0.0; });
        REQUIRE(nonzero == (h < t.sequence.size()));
      }
    }
  }
}

TEST_CASE("rendering") {
  const BlockSet blocks = BlockSet::standard();
  const std::vector<int> seq = {4, 0, 2};
  const auto raster = render_tower(blocks, seq);
  CHECK(raster == std::vector<double>{1, 0, 0, 0, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});

  // Same colours, different blocks.
  const std::vector<int> twin = {5, 1, 3};
  CHECK(render_tower(blocks, twin) == raster);

  const RenderNoise noise{0.05, 7};
  const auto noisy = render_tower(blocks, seq, noise);
  CHECK(noisy == render_tower(blocks, seq, noise));
  CHECK(noisy != raster);
  for (std::size_t i = 0; i < raster.size(); ++i) CHECK(std::abs(noisy[i] - raster[i]) <= 0.05);

  const std::vector<int> too_tall = {0, 1, 2, 3, 4, 5, 0};
  CHECK_THROWS_AS(render_tower(blocks, too_tall), std::invalid_argument);
  CHECK_THROWS_AS(blocks.colour_of(9), std::out_of_range);
}

TEST_CASE("rasters coincide exactly when colour sequences coincide") {
  const BlockSet blocks = BlockSet::standard();
  const std::vector<std::size_t> lengths = {3, 6};
  const auto tasks = enumerate_towers(blocks, lengths);
  for (std::size_t i = 0; i < tasks.size(); i += 7) {
    for (std::size_t j = 0; j < tasks.size(); j += 5) {
      const bool same_colours = colours_of(blocks, tasks[i].sequence) == colours_of(blocks, tasks[j].sequence);
      REQUIRE((tasks[i].raster == tasks[j].raster) == same_colours);
    }
  }
}

TEST_CASE("demo sampling") {
  const std::vector<std::size_t> six = {6};
  const auto demos = sample_demos(BlockSet::standard(), 300, six, 3);
  CHECK(demos.size() == 300);
  std::set<std::vector<int>> distinct;
  for (const auto& d : demos) distinct.insert(d.sequence);
  CHECK(distinct.size() == 300);
  CHECK(sequences_of(sample_demos(BlockSet::standard(), 300, six, 3)) == sequences_of(demos));
  CHECK(sequences_of(sample_demos(BlockSet::standard(), 300, six, 4)) != sequences_of(demos));

  auto full = sequences_of(sample_demos(BlockSet::unique(), 720, six, 1));
  std::sort(full.begin(), full.end());
  CHECK(full == sequences_of(enumerate_towers(BlockSet::unique(), six)));
  CHECK_THROWS_AS(sample_demos(BlockSet::unique(), 721, six, 1), std::invalid_argument);
}

TEST_CASE("fixed-length experiment split is 200/100 and reproducible") {
  using namespace permseq::experiments;
  const ExperimentData a = build(Experiment::kTowerFixed, DataParams{.seed = 2});
  const ExperimentData b = build(Experiment::kTowerFixed, DataParams{.seed = 2});
  CHECK(a.train_ids.size() == 200);
  CHECK(a.test_ids.size() == 100);
  CHECK(a.train().items == b.train().items);
  CHECK(a.test().items == b.test().items);
  CHECK_FALSE(a.data.variable_length);
}

TEST_CASE("colour precision") {
  const BlockSet blocks = BlockSet::standard();  // 0,1 blue; 2,3 yellow; 4,5 red
  const std::vector<int> truth = {4, 5, 0};
  CHECK(colour_precision(truth, truth, blocks) == 1.0);
  const std::vector<int> rbr = {4, 0, 5};
  CHECK(colour_precision(rbr, truth, blocks) == doctest::Approx(1.0 / 3.0));
  const std::vector<int> swapped = {5, 4, 0};
  CHECK(colour_precision(swapped, truth, blocks) == 1.0);
  const std::vector<int> short_pred = {4, 5};
  CHECK_THROWS_AS(colour_precision(short_pred, truth, blocks), std::invalid_argument);

  // The dataset-level metric agrees and counts unreached positions as misses.
  const Dataset d = to_dataset("tower_fixed", blocks, {}, false);
  CHECK(symbol_precision(rbr, truth, d.action_symbols) == doctest::Approx(1.0 / 3.0));
  CHECK(symbol_precision(short_pred, truth, d.action_symbols) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("repetition statistics") {
  const std::vector<std::vector<int>> perms = {{0, 1, 2}, {2, 1, 0}};
  CHECK(repetition_stats(perms) == 0.0);
  const std::vector<std::vector<int>> mixed = {{1, 1, 2}, {0, 1, 2}};
  CHECK(repetition_stats(mixed) == 0.5);
  CHECK(has_repetition(std::vector<int>{1, 1, 2}));
  const std::vector<std::vector<int>> none;
  CHECK_THROWS(repetition_stats(none));
}
