#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "toolgym/raster.hpp"

namespace toolgym::vsp {

struct Cell {
  int row = 0;
  int col = 0;

  friend auto operator<=>(const Cell&, const Cell&) = default;
};

enum class Direction { U, D, L, R };

// Fixed expansion order used for every tie-break: U, D, L, R.
inline constexpr Direction kDirectionOrder[] = {Direction::U, Direction::D, Direction::L,
                                                Direction::R};

char to_char(Direction d);
Cell step(Cell c, Direction d);

// Accepts "RRDD", "R,R,D,D", "[R, R, D, D]", "['R','R']", case-insensitive.
// Throws InvalidAnswer on any other letter or token.
std::vector<Direction> parse_directions(std::string_view text);
std::string format_directions(const std::vector<Direction>& moves);  // "R,R,D,D"

inline constexpr int kMinSize = 3;
inline constexpr int kMaxSize = 9;
inline constexpr int kDefaultCellPx = 100;
inline const std::vector<int> kTrainSizes = {4, 6, 8};
inline const std::vector<int> kHeldOutSizes = {3, 5, 7, 9};

// Default hole count used when a config does not specify one.
int default_hole_count(int size);

struct GridMap {
  int size = 4;
  Cell start;
  Cell goal;
  std::vector<Cell> holes;  // sorted, unique
  int cell_px = kDefaultCellPx;

  bool in_bounds(Cell c) const { return c.row >= 0 && c.col >= 0 && c.row < size && c.col < size; }
  bool is_hole(Cell c) const;
  Pixel center_of(Cell c) const { return {c.col * cell_px + cell_px / 2, c.row * cell_px + cell_px / 2}; }
  // Inverse of center_of for any pixel inside the grid image.
  std::optional<Cell> cell_at(Pixel p) const;

  friend bool operator==(const GridMap&, const GridMap&) = default;
};

struct PathSpec {
  Cell origin;
  std::vector<Direction> moves;

  friend bool operator==(const PathSpec&, const PathSpec&) = default;
};

enum class Kind { Navigation, Verification };

// Verification safety semantics; the default requires reaching the goal.
enum class SafetyRule { ReachGoal, AvoidHolesOnly };

struct VspInstance {
  Kind kind = Kind::Navigation;
  GridMap map;
  std::optional<PathSpec> candidate;
  std::vector<Direction> path_label;  // Navigation ground truth
  bool safe_label = false;            // Verification ground truth
  ImageBuffer rendered{1, 1, colors::kWhite};
};

GridMap generate_map(int size, int hole_count, std::uint64_t seed, int cell_px = kDefaultCellPx);

ImageBuffer render_map(const GridMap& map);

// BFS over hole-free cells; throws NoPath.
std::vector<Direction> shortest_path(const GridMap& map);

struct WalkResult {
  bool in_bounds = true;
  bool hit_hole = false;
  Cell end;
};

WalkResult walk(const GridMap& map, const PathSpec& path);
bool is_safe(const GridMap& map, const PathSpec& path, SafetyRule rule = SafetyRule::ReachGoal);

bool check_navigation(const GridMap& map, const std::vector<Direction>& answer);
// Parses the answer text first; unparsable text throws InvalidAnswer.
bool check_navigation(const GridMap& map, std::string_view answer);

// "Yes"/"No", case-insensitive, surrounding whitespace ignored.
bool parse_yes_no(std::string_view answer);
bool check_verification(const VspInstance& instance, std::string_view answer,
                        SafetyRule rule = SafetyRule::ReachGoal);

VspInstance make_navigation(int size, int hole_count, std::uint64_t seed,
                            int cell_px = kDefaultCellPx);
// Candidate is safe for roughly half the seeds; the label always comes from
// simulating the walk.
VspInstance make_verification(int size, int hole_count, std::uint64_t seed,
                              int cell_px = kDefaultCellPx);

}  // namespace toolgym::vsp
