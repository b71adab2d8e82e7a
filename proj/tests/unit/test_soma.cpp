#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "permseq/random.hpp"
#include "permseq/soma.hpp"

using namespace permseq;
using namespace permseq::soma;

namespace {

const std::vector<SomaSolution>& solutions() {
  static const std::vector<SomaSolution> s = solve_cube();
  return s;
}

CellMask mask_of(std::initializer_list<Cell> cells) {
  CellMask m = 0;
  for (const Cell& c : cells) m |= CellMask{1} << cell_index(c[0], c[1], c[2]);
  return m;
}

Placement part(int id, std::initializer_list<Cell> cells) {
  Placement p;
  p.piece_id = id;
  p.cells = mask_of(cells);
  return p;
}

// Rotation matrices generated independently: signed permutation matrices
// with determinant +1.
std::vector<Rotation> proper_rotations() {
  std::vector<Rotation> out;
  std::array<int, 3> axes = {0, 1, 2};
  do {
    for (int signs = 0; signs < 8; ++signs) {
      Rotation r{};
      for (int i = 0; i < 3; ++i) r[i][axes[i]] = (signs >> i & 1) ? -1 : 1;
      const int det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) -
                      r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
                      r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
      if (det == 1) out.push_back(r);
    }
  } while (std::next_permutation(axes.begin(), axes.end()));
  return out;
}

std::size_t brute_orientation_count(const std::vector<Cell>& cells) {
  std::set<std::vector<Cell>> seen;
  for (const Rotation& r : proper_rotations()) {
    std::vector<Cell> moved;
    for (const Cell& c : cells) {
      Cell m{};
      for (int i = 0; i < 3; ++i) m[i] = r[i][0] * c[0] + r[i][1] * c[1] + r[i][2] * c[2];
      moved.push_back(m);
    }
    Cell lo = moved.front();
    for (const Cell& m : moved) {
      for (int i = 0; i < 3; ++i) lo[i] = std::min(lo[i], m[i]);
    }
    for (Cell& m : moved) {
      for (int i = 0; i < 3; ++i) m[i] -= lo[i];
    }
    std::sort(moved.begin(), moved.end());
    seen.insert(moved);
  }
  return seen.size();
}

bool connected(const std::vector<Cell>& cells) {
  std::vector<bool> reached(cells.size(), false);
  std::vector<std::size_t> stack = {0};
  reached[0] = true;
  while (!stack.empty()) {
    const Cell c = cells[stack.back()];
    stack.pop_back();
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const int d = std::abs(c[0] - cells[j][0]) + std::abs(c[1] - cells[j][1]) + std::abs(c[2] - cells[j][2]);
      if (!reached[j] && d == 1) {
        reached[j] = true;
        stack.push_back(j);
      }
    }
  }
  return std::all_of(reached.begin(), reached.end(), [](bool b) { return b; });
}

}  // namespace

TEST_CASE("the seven pieces") {
  CHECK(pieces().size() == 7);
  std::size_t total = 0;
  for (const Piece& p : pieces()) {
    CHECK(connected(p.cells));
    total += p.cells.size();
  }
  CHECK(total == 27);
  CHECK(piece(1).cells.size() == 3);
  CHECK_THROWS(piece(8));
  // Pairwise non-congruent under rotation.
  for (int a = 1; a <= 7; ++a) {
    const auto oa = enumerate_orientations(piece(a).cells);
    for (int b = a + 1; b <= 7; ++b) {
      auto ob = enumerate_orientations(piece(b).cells);
      std::sort(ob.begin(), ob.end());
      CHECK_FALSE(std::binary_search(ob.begin(), ob.end(), oa.front()));
    }
  }
}

TEST_CASE("orientation counts") {
  CHECK(rotations().size() == 24);
  const std::vector<Cell> single = {{0, 0, 0}};
  CHECK(enumerate_orientations(single).size() == 1);
  const std::vector<Cell> bar = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  CHECK(enumerate_orientations(bar).size() == 3);

  const std::map<std::string, std::size_t> golden = {{"V", 12}, {"L", 24}, {"T", 12}, {"Z", 12},
                                                     {"A", 12}, {"B", 12}, {"P", 8}};
  for (const Piece& p : pieces()) {
    const std::size_t count = enumerate_orientations(p.cells).size();
    CHECK(count == brute_orientation_count(p.cells));
    CHECK(count == golden.at(p.name));
  }
}

TEST_CASE("solver counts") {
  const auto raw = solve_cube_raw();
  CHECK(raw.size() == 11520);
  CHECK(solutions().size() == 240);

  // Every symmetry class has exactly 48 members: no solution is self-symmetric.
  std::map<Labelling, int> classes;
  for (const Labelling& l : raw) ++classes[canonicalize(l)];
  CHECK(classes.size() == 240);
  for (const auto& [form, size] : classes) CHECK(size == 48);

  std::set<Labelling> raw_set(raw.begin(), raw.end());
  CHECK(raw_set.size() == raw.size());
}

TEST_CASE("solutions partition the cube and are sorted") {
  for (std::size_t i = 0; i < solutions().size(); ++i) {
    const SomaSolution& s = solutions()[i];
    REQUIRE(s.placements.size() == 7);
    CellMask all = 0;
    std::size_t cells = 0;
    for (const Placement& p : s.placements) {
      REQUIRE((all & p.cells) == 0);
      all |= p.cells;
      cells += static_cast<std::size_t>(std::popcount(p.cells));
    }
    REQUIRE(cells == 27);
    REQUIRE(all == (CellMask{1} << 27) - 1);
    REQUIRE(canonicalize(s.canonical_form) == s.canonical_form);
    REQUIRE(labelling_of(s.placements) == s.canonical_form);
    if (i > 0) REQUIRE(solutions()[i - 1].canonical_form < s.canonical_form);
  }
}

TEST_CASE("canonical form is invariant under all 48 symmetries") {
  for (std::size_t i = 0; i < solutions().size(); i += 12) {
    const Labelling& base = solutions()[i].canonical_form;
    for (int t = 0; t < 48; ++t) {
      const Labelling moved = transform(base, t);
      REQUIRE(canonicalize(moved) == base);
      // Still a tiling by the seven pieces.
      REQUIRE(labelling_of(placements_of(moved)) == moved);
    }
  }
  // Distinct canonical forms are not related by any symmetry.
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t a = uniform_index(rng, 240);
    std::size_t b = uniform_index(rng, 240);
    if (a == b) b = (b + 1) % 240;
    for (int t = 0; t < 48; ++t) REQUIRE(transform(solutions()[a].canonical_form, t) != solutions()[b].canonical_form);
  }
}

TEST_CASE("side views") {
  for (std::size_t i = 0; i < solutions().size(); i += 30) {
    const Labelling& l = solutions()[i].canonical_form;
    const auto views = render_views(l);
    REQUIRE(views.size() == kViewRasterDim);
    for (std::size_t c = 0; c < views.size(); c += 3) {
      REQUIRE((views[c] != 0.0 || views[c + 1] != 0.0 || views[c + 2] != 0.0));
    }
    // Turning the cube about z permutes the four views. Cell order inside a
    // view depends on the viewing convention, so compare per-view colour multisets.
    auto colour_sets = [](const std::vector<double>& v) {
      std::multiset<std::multiset<std::vector<double>>> out;
      for (std::size_t k = 0; k < 4; ++k) {
        std::multiset<std::vector<double>> cells;
        for (std::size_t c = 0; c < 9; ++c) {
          const std::size_t o = k * 27 + c * 3;
          cells.insert({v[o], v[o + 1], v[o + 2]});
        }
        out.insert(cells);
      }
      return out;
    };
    int turns = 0;
    for (int t = 1; t < 24; ++t) {
      const Rotation& r = rotations()[static_cast<std::size_t>(t)];
      if (r[2][2] != 1) continue;
      ++turns;
      REQUIRE(colour_sets(render_views(transform(l, t))) == colour_sets(views));
    }
    REQUIRE(turns == 3);
  }
  // An interior cell is invisible: relabelling the centre cell changes no view.
  Labelling l = solutions().front().canonical_form;
  const auto before = render_views(l);
  l[static_cast<std::size_t>(cell_index(1, 1, 1))] = static_cast<std::uint8_t>(l[cell_index(1, 1, 1)] % 7 + 1);
  CHECK(render_views(l) == before);
}

TEST_CASE("support examples") {
  const PuzzleState full = PuzzleState::from(solutions().front().placements);
  CHECK(supported_set(full).size() == 7);

  const PuzzleState floating = PuzzleState::from(std::vector<Placement>{part(1, {{0, 0, 2}})});
  CHECK(supported_set(floating).empty());

  // A rests on B, B touches the floor.
  const std::vector<Placement> chain = {part(1, {{0, 0, 1}}), part(2, {{0, 0, 0}, {1, 0, 0}})};
  const PuzzleState s = PuzzleState::from(chain);
  CHECK(supported_set(s).size() == 2);
  const RemovalResult removed = remove_part(s, 2);
  CHECK(removed.collapsed);
  CHECK(supported_set(removed.state).empty());
  const RemovalResult top = remove_part(s, 1);
  CHECK_FALSE(top.collapsed);
  CHECK_FALSE(remove_part(top.state, 2).collapsed);
  CHECK_THROWS_AS(remove_part(s, 5), std::invalid_argument);
}

TEST_CASE("support is monotone under removal") {
  for (std::size_t i = 0; i < solutions().size(); i += 17) {
    const PuzzleState s = PuzzleState::from(solutions()[i].placements);
    const auto before = supported_set(s);
    for (int id = 1; id <= 7; ++id) {
      const auto after = supported_set(remove_part(s, id).state);
      for (int a : after) REQUIRE(std::find(before.begin(), before.end(), a) != before.end());
    }
  }
}

TEST_CASE("labels are collapse-free and some other order collapses") {
  bool found_collapse = false;
  for (const SomaSolution& s : solutions()) {
    const PuzzleState state = PuzzleState::from(s.placements);
    REQUIRE(s.label_order.size() == 7);
    REQUIRE(replays_collapse_free(state, s.label_order));
    REQUIRE(label_extraction_order(state) == s.label_order);
    // Every prefix keeps all remaining parts supported.
    PuzzleState cur = state;
    for (int id : s.label_order) {
      cur = remove_part(cur, id).state;
      REQUIRE(supported_set(cur).size() == cur.remaining.size());
    }
    if (!found_collapse) {
      std::vector<int> order = {1, 2, 3, 4, 5, 6, 7};
      do {
        if (!replays_collapse_free(state, order)) {
          found_collapse = true;
          break;
        }
      } while (std::next_permutation(order.begin(), order.end()));
    }
  }
  CHECK(found_collapse);
}

TEST_CASE("solutions cache round trip") {
  std::stringstream buffer;
  write_solutions(buffer, solutions());
  const auto back = read_solutions(buffer);
  REQUIRE(back.size() == solutions().size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].canonical_form == solutions()[i].canonical_form);
    CHECK(back[i].label_order == solutions()[i].label_order);
    CHECK(back[i].placements == solutions()[i].placements);
  }
  std::stringstream bad("not a record\n");
  CHECK_THROWS(read_solutions(bad));
}

TEST_CASE("soma dataset") {
  const Dataset d = to_dataset(solutions());
  CHECK(d.items.size() == 240);
  CHECK(d.n_actions == 7);
  CHECK(d.max_len == 7);
  CHECK_FALSE(d.variable_length);
  CHECK(d.raster_dim() == kViewRasterDim);
  CHECK_NOTHROW(d.validate());
  for (std::size_t i = 0; i < 240; ++i) {
    for (std::size_t k = 0; k < 7; ++k) REQUIRE(d.items[i].actions[k] == solutions()[i].label_order[k] - 1);
  }
}
