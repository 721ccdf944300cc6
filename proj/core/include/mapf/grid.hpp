#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mapf {

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

// Row 0 is the top of the map, so Up decreases the row index. The numeric
// values are frozen: they are also the action-label ids in dataset records
// and the output classes of the action head.
enum class Action : std::uint8_t { Up = 0, Down = 1, Left = 2, Right = 3, Wait = 4 };

inline constexpr int kNumActions = 5;
inline constexpr std::array<Action, 5> kAllActions = {Action::Up, Action::Down, Action::Left,
                                                      Action::Right, Action::Wait};
inline constexpr std::array<Action, 4> kMoveActions = {Action::Up, Action::Down, Action::Left,
                                                       Action::Right};

constexpr Cell delta(Action a) {
  switch (a) {
    case Action::Up:    return {-1, 0};
    case Action::Down:  return {1, 0};
    case Action::Left:  return {0, -1};
    case Action::Right: return {0, 1};
    case Action::Wait:  return {0, 0};
  }
  return {0, 0};
}

constexpr Cell apply(Cell c, Action a) {
  const Cell d = delta(a);
  return {c.row + d.row, c.col + d.col};
}

// Action taking `from` to `to`, or nullopt if the cells are not identical or
// 4-adjacent.
std::optional<Action> action_between(Cell from, Cell to);

std::string_view action_name(Action a);

// Occupancy grid. Cells are stored row-major; blocked cells cannot be entered.
class GridMap {
 public:
  GridMap() = default;
  GridMap(int width, int height);  // all free; throws InvalidConfig if either < 1

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t cell_count() const { return blocked_.size(); }

  bool in_bounds(Cell c) const {
    return c.row >= 0 && c.row < height_ && c.col >= 0 && c.col < width_;
  }
  bool is_blocked(Cell c) const { return blocked_[index(c)] != 0; }
  bool is_free(Cell c) const { return in_bounds(c) && !is_blocked(c); }

  void set_blocked(Cell c, bool b) { blocked_[index(c)] = b ? 1 : 0; }

  std::size_t index(Cell c) const {
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(c.col);
  }
  Cell cell_at(std::size_t index) const {
    return {static_cast<int>(index) / width_, static_cast<int>(index) % width_};
  }

  std::size_t blocked_count() const;
  std::vector<Cell> free_cells() const;

  friend bool operator==(const GridMap&, const GridMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> blocked_;
};

// Text form: one line per row, '.' free and '#' blocked. Parsing accepts '@'
// and 'T' as blocked too (MovingAI habits) and requires equal-length lines.
std::string to_text(const GridMap& map);
GridMap grid_from_text(std::string_view text);

}  // namespace mapf

template <>
struct std::hash<mapf::Cell> {
  std::size_t operator()(const mapf::Cell& c) const noexcept {
    return std::hash<long long>()((static_cast<long long>(c.row) << 32) ^
                                  static_cast<unsigned>(c.col));
  }
};
