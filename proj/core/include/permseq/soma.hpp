#pragma once

// Soma cube: the seven Soma polycubes tiling a 3x3x3 cube, solution
// enumeration up to rotation and reflection, side-view rendering, and a
// quasi-static support model that decides whether removing a part collapses
// the rest.
//
// Cells are indexed x + 3y + 9z with gravity along -z; the cube rests on z=0.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "permseq/dataset.hpp"

namespace permseq::soma {

inline constexpr std::size_t kCells = 27;
inline constexpr int kPieceCount = 7;
inline constexpr std::size_t kViewRasterDim = 4 * 3 * 3 * 3;

using Cell = std::array<int, 3>;
using CellMask = std::uint32_t;
using Labelling = std::array<std::uint8_t, kCells>;

constexpr int cell_index(int x, int y, int z) { return x + 3 * y + 9 * z; }
constexpr Cell cell_coords(int index) { return {index % 3, (index / 3) % 3, index / 9}; }

struct Piece {
  int id = 0;
  std::string name;
  std::vector<Cell> cells;
};

// Ids 1..7: V (the tricube), L, T, Z, A and B (mirror-image screws), P (branch).
const std::vector<Piece>& pieces();
const Piece& piece(int id);
inline constexpr int kScrewA = 5;
inline constexpr int kScrewB = 6;

// The 24 proper rotations as signed permutation matrices, identity first.
using Rotation = std::array<std::array<int, 3>, 3>;
const std::vector<Rotation>& rotations();

// Distinct rotated copies of a cell set, each shifted to non-negative offsets
// and sorted.
std::vector<std::vector<Cell>> enumerate_orientations(std::span<const Cell> cells);

struct Placement {
  int piece_id = 0;
  int orientation = 0;
  Cell offset{};
  CellMask cells = 0;
  friend bool operator==(const Placement&, const Placement&) = default;
};

// Every placement of every piece inside the cube.
const std::vector<Placement>& all_placements();

struct SomaSolution {
  std::vector<Placement> placements;  // one per piece, ordered by piece id
  Labelling canonical_form{};
  std::vector<int> label_order;       // collapse-free extraction order of piece ids
};

// Exact tilings of the cube, every orientation and mirror image included.
std::vector<Labelling> solve_cube_raw();

// One representative per symmetry class, sorted by canonical form, with
// extraction labels attached.
std::vector<SomaSolution> solve_cube();

// Symmetry t in [0, 48): rotation t % 24, mirrored in x when t >= 24. Mirror
// symmetries swap the two screw labels so the result is again a tiling.
Labelling transform(const Labelling& labels, int symmetry);
Labelling canonicalize(const Labelling& labels);

Labelling labelling_of(std::span<const Placement> placements);
std::vector<Placement> placements_of(const Labelling& labels);

// Four 3x3 RGB side views from +x, -x, +y, -y; row 0 is the top layer.
std::vector<double> render_views(const Labelling& labels);
std::array<double, 3> piece_colour(int piece_id);

struct PuzzleState {
  std::vector<Placement> remaining;

  static PuzzleState from(std::span<const Placement> placements);
  bool contains(int piece_id) const;
};

// Ids of placements that rest, directly or through a chain, on z=0.
std::vector<int> supported_set(const PuzzleState& state);

struct RemovalResult {
  PuzzleState state;
  bool collapsed = false;
};

// collapsed is true iff a remaining part that was supported before the
// deletion is unsupported after it.
RemovalResult remove_part(const PuzzleState& state, int piece_id);

bool replays_collapse_free(const PuzzleState& state, std::span<const int> order);

// First collapse-free order in depth-first search trying lower ids first.
std::vector<int> label_extraction_order(const PuzzleState& state);

// Text cache: one line per solution, 27 cell labels then the 7-digit order.
void write_solutions(std::ostream& out, std::span<const SomaSolution> solutions);
std::vector<SomaSolution> read_solutions(std::istream& in);

Dataset to_dataset(std::span<const SomaSolution> solutions);

}  // namespace permseq::soma
