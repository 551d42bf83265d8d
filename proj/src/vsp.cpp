#include "toolgym/vsp.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <map>

#include "toolgym/error.hpp"
#include "toolgym/rng.hpp"

namespace toolgym::vsp {

namespace {

constexpr Color kIce{255, 255, 255};
constexpr Color kHole{0, 90, 255};
constexpr Color kStart{0, 170, 0};
constexpr Color kGoal{255, 215, 0};
constexpr Color kGridLine{128, 128, 128};
constexpr Color kGlyph{32, 32, 32};

constexpr int kMaxGenerationAttempts = 100000;

bool reachable(const GridMap& map) {
  std::vector<char> seen(static_cast<std::size_t>(map.size * map.size), 0);
  std::vector<char> hole(seen.size(), 0);
  for (const Cell& h : map.holes) hole[static_cast<std::size_t>(h.row * map.size + h.col)] = 1;
  std::deque<Cell> queue{map.start};
  seen[static_cast<std::size_t>(map.start.row * map.size + map.start.col)] = 1;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    if (c == map.goal) return true;
    for (Direction d : kDirectionOrder) {
      const Cell n = step(c, d);
      if (!map.in_bounds(n)) continue;
      const auto i = static_cast<std::size_t>(n.row * map.size + n.col);
      if (seen[i] || hole[i]) continue;
      seen[i] = 1;
      queue.push_back(n);
    }
  }
  return false;
}

}  // namespace

char to_char(Direction d) {
  switch (d) {
    case Direction::U: return 'U';
    case Direction::D: return 'D';
    case Direction::L: return 'L';
    case Direction::R: return 'R';
  }
  return '?';
}

Cell step(Cell c, Direction d) {
  switch (d) {
    case Direction::U: return {c.row - 1, c.col};
    case Direction::D: return {c.row + 1, c.col};
    case Direction::L: return {c.row, c.col - 1};
    case Direction::R: return {c.row, c.col + 1};
  }
  return c;
}

std::vector<Direction> parse_directions(std::string_view text) {
  std::vector<Direction> out;
  for (char raw : text) {
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
    switch (c) {
      case 'U': out.push_back(Direction::U); break;
      case 'D': out.push_back(Direction::D); break;
      case 'L': out.push_back(Direction::L); break;
      case 'R': out.push_back(Direction::R); break;
      case ',': case ' ': case '\t': case '\n': case '[': case ']': case '\'': case '"':
        break;
      default:
        throw Error(ErrorKind::InvalidAnswer,
                    "unexpected character '" + std::string(1, raw) + "' in direction list");
    }
  }
  return out;
}

std::string format_directions(const std::vector<Direction>& moves) {
  std::string out;
  for (std::size_t i = 0; i < moves.size(); ++i) {
    if (i > 0) out += ',';
    out += to_char(moves[i]);
  }
  return out;
}

int default_hole_count(int size) { return size * size / 5; }

bool GridMap::is_hole(Cell c) const { return std::binary_search(holes.begin(), holes.end(), c); }

std::optional<Cell> GridMap::cell_at(Pixel p) const {
  if (p.x < 0 || p.y < 0) return std::nullopt;
  const Cell c{p.y / cell_px, p.x / cell_px};
  if (!in_bounds(c)) return std::nullopt;
  return c;
}

GridMap generate_map(int size, int hole_count, std::uint64_t seed, int cell_px) {
  if (size < kMinSize || size > kMaxSize) {
    throw Error(ErrorKind::InfeasibleConfig,
                "grid size must be in [3, 9], got " + std::to_string(size));
  }
  if (hole_count < 0 || hole_count > size * size - 2) {
    throw Error(ErrorKind::InfeasibleConfig,
                std::to_string(hole_count) + " holes cannot fit a " + std::to_string(size) + "x" +
                    std::to_string(size) + " grid with distinct start and goal");
  }
  if (cell_px < 8) throw Error(ErrorKind::InfeasibleConfig, "cell_px must be >= 8");

  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(size * size));
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) cells.push_back({r, c});
  }
  Rng rng(seed);
  for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
    rng.shuffle(cells);
    GridMap map;
    map.size = size;
    map.cell_px = cell_px;
    map.start = cells[0];
    map.goal = cells[1];
    map.holes.assign(cells.begin() + 2, cells.begin() + 2 + hole_count);
    std::sort(map.holes.begin(), map.holes.end());
    if (reachable(map)) return map;
  }
  throw Error(ErrorKind::InfeasibleConfig, "no solvable map found for this hole count");
}

ImageBuffer render_map(const GridMap& map) {
  const int px = map.size * map.cell_px;
  ImageBuffer img(px, px, kIce);
  auto cell_box = [&](Cell c) {
    return BBox{c.col * map.cell_px, c.row * map.cell_px, (c.col + 1) * map.cell_px,
                (c.row + 1) * map.cell_px};
  };
  for (const Cell& h : map.holes) img = fill_rect(img, cell_box(h), kHole);
  img = fill_rect(img, cell_box(map.start), kStart);
  img = fill_rect(img, cell_box(map.goal), kGoal);

  for (int k = 0; k <= map.size; ++k) {
    const int line = std::min(k * map.cell_px, px - 1);
    for (int t = 0; t < px; ++t) {
      img.set(line, t, kGridLine);
      img.set(t, line, kGridLine);
    }
  }

  const int scale = std::max(1, map.cell_px / 20);
  auto glyph = [&](Cell c, std::string_view letter) {
    const Pixel center = map.center_of(c);
    draw_text(img, center.x - text_width(letter, scale) / 2, center.y - kGlyphHeight * scale / 2,
              letter, kGlyph, scale);
  };
  glyph(map.start, "S");
  glyph(map.goal, "G");
  return img;
}

std::vector<Direction> shortest_path(const GridMap& map) {
  const auto n = static_cast<std::size_t>(map.size * map.size);
  auto index = [&](Cell c) { return static_cast<std::size_t>(c.row * map.size + c.col); };
  std::vector<int> parent_dir(n, -1);
  std::vector<char> seen(n, 0);
  std::deque<Cell> queue{map.start};
  seen[index(map.start)] = 1;
  bool found = false;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    if (c == map.goal) {
      found = true;
      break;
    }
    for (int d = 0; d < 4; ++d) {
      const Cell next = step(c, kDirectionOrder[d]);
      if (!map.in_bounds(next) || map.is_hole(next) || seen[index(next)]) continue;
      seen[index(next)] = 1;
      parent_dir[index(next)] = d;
      queue.push_back(next);
    }
  }
  if (!found) throw Error(ErrorKind::NoPath, "goal unreachable from start");

  std::vector<Direction> moves;
  Cell c = map.goal;
  while (!(c == map.start)) {
    const Direction d = kDirectionOrder[parent_dir[index(c)]];
    moves.push_back(d);
    switch (d) {
      case Direction::U: c.row += 1; break;
      case Direction::D: c.row -= 1; break;
      case Direction::L: c.col += 1; break;
      case Direction::R: c.col -= 1; break;
    }
  }
  std::reverse(moves.begin(), moves.end());
  return moves;
}

WalkResult walk(const GridMap& map, const PathSpec& path) {
  WalkResult result;
  Cell c = path.origin;
  result.in_bounds = map.in_bounds(c);
  result.hit_hole = result.in_bounds && map.is_hole(c);
  for (Direction d : path.moves) {
    if (!result.in_bounds || result.hit_hole) break;
    c = step(c, d);
    if (!map.in_bounds(c)) {
      result.in_bounds = false;
      break;
    }
    if (map.is_hole(c)) result.hit_hole = true;
  }
  result.end = c;
  return result;
}

bool is_safe(const GridMap& map, const PathSpec& path, SafetyRule rule) {
  const WalkResult w = walk(map, path);
  if (!w.in_bounds || w.hit_hole) return false;
  return rule == SafetyRule::AvoidHolesOnly || w.end == map.goal;
}

bool check_navigation(const GridMap& map, const std::vector<Direction>& answer) {
  return is_safe(map, PathSpec{map.start, answer}, SafetyRule::ReachGoal);
}

bool check_navigation(const GridMap& map, std::string_view answer) {
  return check_navigation(map, parse_directions(answer));
}

bool parse_yes_no(std::string_view answer) {
  std::string norm;
  for (char c : answer) {
    if (!std::isspace(static_cast<unsigned char>(c))) {
      norm += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  if (norm == "yes") return true;
  if (norm == "no") return false;
  throw Error(ErrorKind::InvalidAnswer, "expected Yes or No, got '" + std::string(answer) + "'");
}

bool check_verification(const VspInstance& instance, std::string_view answer, SafetyRule rule) {
  if (instance.kind != Kind::Verification || !instance.candidate) {
    throw Error(ErrorKind::InvalidArgument, "not a verification instance");
  }
  const bool said_safe = parse_yes_no(answer);
  return said_safe == is_safe(instance.map, *instance.candidate, rule);
}

VspInstance make_navigation(int size, int hole_count, std::uint64_t seed, int cell_px) {
  VspInstance inst;
  inst.kind = Kind::Navigation;
  inst.map = generate_map(size, hole_count, seed, cell_px);
  inst.path_label = shortest_path(inst.map);
  inst.rendered = render_map(inst.map);
  return inst;
}

VspInstance make_verification(int size, int hole_count, std::uint64_t seed, int cell_px) {
  VspInstance inst;
  inst.kind = Kind::Verification;
  inst.map = generate_map(size, hole_count, seed, cell_px);
  const std::vector<Direction> best = shortest_path(inst.map);

  Rng rng(Rng::derive(seed, 0x7e51f1ca));
  const bool want_safe = rng.coin();
  PathSpec candidate{inst.map.start, best};
  if (!want_safe) {
    for (int attempt = 0; attempt < 64; ++attempt) {
      PathSpec trial{inst.map.start, best};
      const auto pick = rng.below(3);
      if (pick == 0 && trial.moves.size() >= 2) {
        trial.moves.resize(1 + rng.below(trial.moves.size() - 1));
      } else if (pick == 1) {
        trial.moves.push_back(kDirectionOrder[rng.below(4)]);
        trial.moves.push_back(kDirectionOrder[rng.below(4)]);
      } else {
        const auto at = rng.below(trial.moves.size());
        trial.moves[at] = kDirectionOrder[rng.below(4)];
      }
      if (!is_safe(inst.map, trial)) {
        candidate = std::move(trial);
        break;
      }
    }
  }
  inst.candidate = candidate;
  inst.safe_label = is_safe(inst.map, candidate);
  inst.rendered = render_map(inst.map);
  return inst;
}

}  // namespace toolgym::vsp
