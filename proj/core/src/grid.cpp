#include "mapf/grid.hpp"

#include <stdexcept>

#include "mapf/errors.hpp"

namespace mapf {

std::optional<Action> action_between(Cell from, Cell to) {
  for (Action a : kAllActions) {
    if (apply(from, a) == to) return a;
  }
  return std::nullopt;
}

std::string_view action_name(Action a) {
  switch (a) {
    case Action::Up:    return "up";
    case Action::Down:  return "down";
    case Action::Left:  return "left";
    case Action::Right: return "right";
    case Action::Wait:  return "wait";
  }
  return "?";
}

GridMap::GridMap(int width, int height) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw InvalidConfig("GridMap: width and height must be >= 1");
  blocked_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

std::size_t GridMap::blocked_count() const {
  std::size_t n = 0;
  for (std::uint8_t b : blocked_) n += b;
  return n;
}

std::vector<Cell> GridMap::free_cells() const {
  std::vector<Cell> cells;
  cells.reserve(blocked_.size());
  for (std::size_t i = 0; i < blocked_.size(); ++i) {
    if (!blocked_[i]) cells.push_back(cell_at(i));
  }
  return cells;
}

std::string to_text(const GridMap& map) {
  std::string out;
  out.reserve(static_cast<std::size_t>(map.height()) * (static_cast<std::size_t>(map.width()) + 1));
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) {
      out += map.is_blocked({r, c}) ? '#' : '.';
    }
    out += '\n';
  }
  return out;
}

GridMap grid_from_text(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    pos = nl + 1;
  }
  if (lines.empty()) throw InvalidConfig("grid_from_text: empty input");

  const std::size_t width = lines[0].size();
  GridMap map(static_cast<int>(width), static_cast<int>(lines.size()));
  for (std::size_t r = 0; r < lines.size(); ++r) {
    if (lines[r].size() != width) throw InvalidConfig("grid_from_text: ragged rows");
    for (std::size_t c = 0; c < width; ++c) {
      const char ch = lines[r][c];
      if (ch == '#' || ch == '@' || ch == 'T') {
        map.set_blocked({static_cast<int>(r), static_cast<int>(c)}, true);
      } else if (ch != '.') {
        throw InvalidConfig(std::string("grid_from_text: unexpected character '") + ch + "'");
      }
    }
  }
  return map;
}

}  // namespace mapf
