#include "permseq/soma.hpp"

#include <algorithm>
#include <bit>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace permseq::soma {

namespace {

CellMask bit(int cell) { return CellMask{1} << cell; }

Cell rotate(const Rotation& r, const Cell& c) {
  Cell out{};
  for (int i = 0; i < 3; ++i) out[i] = r[i][0] * c[0] + r[i][1] * c[1] + r[i][2] * c[2];
  return out;
}

std::vector<Cell> normalised(std::vector<Cell> cells) {
  Cell low = cells.front();
  for (const Cell& c : cells) {
    for (int i = 0; i < 3; ++i) low[i] = std::min(low[i], c[i]);
  }
  for (Cell& c : cells) {
    for (int i = 0; i < 3; ++i) c[i] -= low[i];
  }
  std::sort(cells.begin(), cells.end());
  return cells;
}

int determinant(const Rotation& r) {
  return r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
         r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
}

std::uint8_t swap_screws(std::uint8_t label) {
  if (label == kScrewA) return kScrewB;
  if (label == kScrewB) return kScrewA;
  return label;
}

}  // namespace

const std::vector<Piece>& pieces() {
  static const std::vector<Piece> kPieces = {
      {1, "V", {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}},
      {2, "L", {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {0, 1, 0}}},
      {3, "T", {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {1, 1, 0}}},
      {4, "Z", {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {2, 1, 0}}},
      {5, "A", {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 0, 1}}},
      {6, "B", {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 1, 1}}},
      {7, "P", {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}},
  };
  return kPieces;
}

const Piece& piece(int id) {
  if (id < 1 || id > kPieceCount) throw std::out_of_range("no Soma piece with id " + std::to_string(id));
  return pieces()[static_cast<std::size_t>(id - 1)];
}

const std::vector<Rotation>& rotations() {
  static const std::vector<Rotation> kRotations = [] {
    std::vector<Rotation> out;
    std::array<int, 3> axes{0, 1, 2};
    do {
      for (int signs = 0; signs < 8; ++signs) {
        Rotation r{};
        for (int i = 0; i < 3; ++i) r[i][axes[i]] = (signs >> i) & 1 ? -1 : 1;
        if (determinant(r) == 1) out.push_back(r);
      }
    } while (std::next_permutation(axes.begin(), axes.end()));
    return out;
  }();
  return kRotations;
}

std::vector<std::vector<Cell>> enumerate_orientations(std::span<const Cell> cells) {
  std::vector<std::vector<Cell>> out;
  for (const Rotation& r : rotations()) {
    std::vector<Cell> turned;
    for (const Cell& c : cells) turned.push_back(rotate(r, c));
    turned = normalised(std::move(turned));
    if (std::find(out.begin(), out.end(), turned) == out.end()) out.push_back(std::move(turned));
  }
  return out;
}

const std::vector<Placement>& all_placements() {
  static const std::vector<Placement> kPlacements = [] {
    std::vector<Placement> out;
    for (const Piece& p : pieces()) {
      const auto orientations = enumerate_orientations(p.cells);
      for (std::size_t o = 0; o < orientations.size(); ++o) {
        for (int dz = 0; dz < 3; ++dz) {
          for (int dy = 0; dy < 3; ++dy) {
            for (int dx = 0; dx < 3; ++dx) {
              CellMask mask = 0;
              bool inside = true;
              for (const Cell& c : orientations[o]) {
                const int x = c[0] + dx, y = c[1] + dy, z = c[2] + dz;
                if (x > 2 || y > 2 || z > 2) {
                  inside = false;
                  break;
                }
                mask |= bit(cell_index(x, y, z));
              }
              if (inside) out.push_back({p.id, static_cast<int>(o), {dx, dy, dz}, mask});
            }
          }
        }
      }
    }
    return out;
  }();
  return kPlacements;
}

std::vector<Labelling> solve_cube_raw() {
  // Placements grouped by their lowest cell: when filling the lowest empty
  // cell, only placements starting there can fit.
  std::array<std::vector<const Placement*>, kCells> by_low_cell;
  for (const Placement& p : all_placements()) {
    by_low_cell[static_cast<std::size_t>(std::countr_zero(p.cells))].push_back(&p);
  }
  std::vector<Labelling> out;
  Labelling labels{};
  CellMask filled = 0;
  unsigned used = 0;
  const CellMask full = (CellMask{1} << kCells) - 1;
  std::function<void()> fill = [&]() {
    if (filled == full) {
      out.push_back(labels);
      return;
    }
    const int cell = std::countr_zero(~filled);
    for (const Placement* p : by_low_cell[static_cast<std::size_t>(cell)]) {
      if ((used >> p->piece_id) & 1U) continue;
      if (p->cells & filled) continue;
      filled |= p->cells;
      used |= 1U << p->piece_id;
      for (int c = 0; c < static_cast<int>(kCells); ++c) {
        if (p->cells & bit(c)) labels[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(p->piece_id);
      }
      fill();
      filled &= ~p->cells;
      used &= ~(1U << p->piece_id);
    }
  };
  fill();
  return out;
}

Labelling transform(const Labelling& labels, int symmetry) {
  if (symmetry < 0 || symmetry >= 48) throw std::out_of_range("symmetry index must be in [0, 48)");
  const Rotation& r = rotations()[static_cast<std::size_t>(symmetry % 24)];
  const bool mirror = symmetry >= 24;
  Labelling out{};
  for (int p = 0; p < static_cast<int>(kCells); ++p) {
    Cell c = cell_coords(p);
    Cell centred{c[0] - 1, c[1] - 1, c[2] - 1};
    if (mirror) centred[0] = -centred[0];
    const Cell q = rotate(r, centred);
    const std::uint8_t label = labels[static_cast<std::size_t>(p)];
    out[static_cast<std::size_t>(cell_index(q[0] + 1, q[1] + 1, q[2] + 1))] = mirror ? swap_screws(label) : label;
  }
  return out;
}

Labelling canonicalize(const Labelling& labels) {
  Labelling best = labels;
  for (int s = 1; s < 48; ++s) best = std::min(best, transform(labels, s));
  return best;
}

Labelling labelling_of(std::span<const Placement> placements) {
  Labelling labels{};
  for (const Placement& p : placements) {
    for (int c = 0; c < static_cast<int>(kCells); ++c) {
      if (p.cells & bit(c)) labels[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(p.piece_id);
    }
  }
  return labels;
}

std::vector<Placement> placements_of(const Labelling& labels) {
  static const std::map<std::pair<int, CellMask>, Placement> kLookup = [] {
    std::map<std::pair<int, CellMask>, Placement> m;
    for (const Placement& p : all_placements()) m.emplace(std::make_pair(p.piece_id, p.cells), p);
    return m;
  }();
  std::array<CellMask, kPieceCount + 1> masks{};
  for (int c = 0; c < static_cast<int>(kCells); ++c) {
    const int id = labels[static_cast<std::size_t>(c)];
    if (id < 1 || id > kPieceCount) throw std::invalid_argument("labelling has an uncovered or invalid cell");
    masks[static_cast<std::size_t>(id)] |= bit(c);
  }
  std::vector<Placement> out;
  for (int id = 1; id <= kPieceCount; ++id) {
    auto it = kLookup.find({id, masks[static_cast<std::size_t>(id)]});
    if (it == kLookup.end()) throw std::invalid_argument("cells labelled " + std::to_string(id) + " do not form that piece");
    out.push_back(it->second);
  }
  return out;
}

std::vector<SomaSolution> solve_cube() {
  std::vector<Labelling> canonical;
  for (const Labelling& raw : solve_cube_raw()) canonical.push_back(canonicalize(raw));
  std::sort(canonical.begin(), canonical.end());
  canonical.erase(std::unique(canonical.begin(), canonical.end()), canonical.end());
  std::vector<SomaSolution> out;
  out.reserve(canonical.size());
  for (const Labelling& form : canonical) {
    SomaSolution s;
    s.placements = placements_of(form);
    s.canonical_form = form;
    s.label_order = label_extraction_order(PuzzleState::from(s.placements));
    out.push_back(std::move(s));
  }
  return out;
}

std::array<double, 3> piece_colour(int piece_id) {
  static constexpr std::array<std::array<double, 3>, kPieceCount> kColours = {{
      {1.0, 0.0, 0.0},
      {0.0, 1.0, 0.0},
      {0.0, 0.0, 1.0},
      {1.0, 1.0, 0.0},
      {1.0, 0.0, 1.0},
      {0.0, 1.0, 1.0},
      {1.0, 0.5, 0.0},
  }};
  return kColours.at(static_cast<std::size_t>(piece_id - 1));
}

std::vector<double> render_views(const Labelling& labels) {
  // Viewing direction into the cube for each camera; "right" is direction x up.
  static constexpr std::array<Cell, 4> kDirections = {{{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}}};
  std::vector<double> raster;
  raster.reserve(kViewRasterDim);
  for (const Cell& d : kDirections) {
    const Cell right{d[1], -d[0], 0};
    const int depth_axis = d[0] != 0 ? 0 : 1;
    const int lateral_axis = right[0] != 0 ? 0 : 1;
    const int lateral_sign = right[lateral_axis];
    const int start = d[depth_axis] < 0 ? 2 : 0;
    const int step = d[depth_axis];
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 3; ++col) {
        Cell c{};
        c[2] = 2 - row;
        c[lateral_axis] = lateral_sign > 0 ? col : 2 - col;
        std::array<double, 3> colour{0.0, 0.0, 0.0};
        for (int k = 0, depth = start; k < 3; ++k, depth += step) {
          c[depth_axis] = depth;
          const int id = labels[static_cast<std::size_t>(cell_index(c[0], c[1], c[2]))];
          if (id != 0) {
            colour = piece_colour(id);
            break;
          }
        }
        raster.insert(raster.end(), colour.begin(), colour.end());
      }
    }
  }
  return raster;
}

PuzzleState PuzzleState::from(std::span<const Placement> placements) {
  return PuzzleState{std::vector<Placement>(placements.begin(), placements.end())};
}

bool PuzzleState::contains(int piece_id) const {
  return std::any_of(remaining.begin(), remaining.end(), [&](const Placement& p) { return p.piece_id == piece_id; });
}

std::vector<int> supported_set(const PuzzleState& state) {
  std::array<int, kCells> owner;
  owner.fill(-1);
  for (std::size_t i = 0; i < state.remaining.size(); ++i) {
    for (int c = 0; c < static_cast<int>(kCells); ++c) {
      if (state.remaining[i].cells & bit(c)) owner[static_cast<std::size_t>(c)] = static_cast<int>(i);
    }
  }
  const CellMask ground = (CellMask{1} << 9) - 1;
  std::vector<bool> supported(state.remaining.size(), false);
  for (std::size_t i = 0; i < supported.size(); ++i) supported[i] = (state.remaining[i].cells & ground) != 0;
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < supported.size(); ++i) {
      if (supported[i]) continue;
      const CellMask cells = state.remaining[i].cells;
      for (int c = 9; c < static_cast<int>(kCells); ++c) {
        if (!(cells & bit(c))) continue;
        const int below = owner[static_cast<std::size_t>(c - 9)];
        if (below >= 0 && below != static_cast<int>(i) && supported[static_cast<std::size_t>(below)]) {
          supported[i] = true;
          changed = true;
          break;
        }
      }
    }
  }
  std::vector<int> ids;
  for (std::size_t i = 0; i < supported.size(); ++i) {
    if (supported[i]) ids.push_back(state.remaining[i].piece_id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

RemovalResult remove_part(const PuzzleState& state, int piece_id) {
  auto it = std::find_if(state.remaining.begin(), state.remaining.end(),
                         [&](const Placement& p) { return p.piece_id == piece_id; });
  if (it == state.remaining.end()) throw std::invalid_argument("remove_part: piece " + std::to_string(piece_id) + " absent");
  const std::vector<int> before = supported_set(state);
  RemovalResult result;
  result.state.remaining = state.remaining;
  result.state.remaining.erase(result.state.remaining.begin() + (it - state.remaining.begin()));
  const std::vector<int> after = supported_set(result.state);
  for (int id : before) {
    if (id != piece_id && !std::binary_search(after.begin(), after.end(), id)) {
      result.collapsed = true;
      break;
    }
  }
  return result;
}

bool replays_collapse_free(const PuzzleState& state, std::span<const int> order) {
  PuzzleState current = state;
  for (int id : order) {
    if (!current.contains(id)) return false;
    RemovalResult r = remove_part(current, id);
    if (r.collapsed) return false;
    current = std::move(r.state);
  }
  return current.remaining.empty();
}

std::vector<int> label_extraction_order(const PuzzleState& state) {
  std::vector<int> order;
  std::function<bool(const PuzzleState&)> search = [&](const PuzzleState& current) {
    if (current.remaining.empty()) return true;
    std::vector<int> ids;
    for (const Placement& p : current.remaining) ids.push_back(p.piece_id);
    std::sort(ids.begin(), ids.end());
    for (int id : ids) {
      RemovalResult r = remove_part(current, id);
      if (r.collapsed) continue;
      order.push_back(id);
      if (search(r.state)) return true;
      order.pop_back();
    }
    return false;
  };
  if (!search(state)) throw std::runtime_error("label_extraction_order: no collapse-free extraction order exists");
  return order;
}

void write_solutions(std::ostream& out, std::span<const SomaSolution> solutions) {
  out << "# soma-solutions v1 count=" << solutions.size() << "\n";
  out << "# cells: 27 piece ids indexed x+3y+9z; order: extraction sequence of piece ids\n";
  for (const SomaSolution& s : solutions) {
    for (std::uint8_t label : s.canonical_form) out << static_cast<int>(label);
    out << ' ';
    for (int id : s.label_order) out << id;
    out << '\n';
  }
}

std::vector<SomaSolution> read_solutions(std::istream& in) {
  std::vector<SomaSolution> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::istringstream fields(line);
    std::string cells, order;
    if (!(fields >> cells >> order) || cells.size() != kCells || order.size() != static_cast<std::size_t>(kPieceCount)) {
      throw std::runtime_error("malformed Soma solution record: '" + line + "'");
    }
    SomaSolution s;
    for (std::size_t i = 0; i < kCells; ++i) s.canonical_form[i] = static_cast<std::uint8_t>(cells[i] - '0');
    for (char c : order) s.label_order.push_back(c - '0');
    s.placements = placements_of(s.canonical_form);
    out.push_back(std::move(s));
  }
  return out;
}

Dataset to_dataset(std::span<const SomaSolution> solutions) {
  Dataset d;
  d.env = "soma";
  d.n_actions = kPieceCount;
  d.max_len = kPieceCount;
  d.variable_length = false;
  for (const Piece& p : pieces()) {
    d.action_symbols.push_back(p.id - 1);
    d.symbol_names.push_back(p.name);
  }
  int id = 0;
  for (const SomaSolution& s : solutions) {
    std::vector<int> actions;
    for (int piece_id : s.label_order) actions.push_back(piece_id - 1);
    d.items.push_back({id++, render_views(s.canonical_form), actions, actions.size()});
  }
  return d;
}

}  // namespace permseq::soma
