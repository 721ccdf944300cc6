#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mapf/grid.hpp"

namespace mapf {

struct ParseError : std::runtime_error {
  int line;  // 1-based line in the input, 0 when unknown
  ParseError(std::string msg, int line_)
      : std::runtime_error(msg + " (line " + std::to_string(line_) + ")"), line(line_) {}
};

// MovingAI .map: `type <x>`, `height H`, `width W`, `map`, then H rows of W
// symbols. '.' and 'G' are free; '@', 'O', 'T', 'W' are blocked.
GridMap parse_movingai(std::string_view text);
GridMap parse_movingai_file(const std::filesystem::path& path);

// Inverse of parse_movingai up to symbol normalization ('.' / '@').
std::string to_movingai(const GridMap& map);

// Split into (rows × cols) equal tiles, row-major. Dimensions must divide.
std::vector<GridMap> tile_map(const GridMap& map, int rows, int cols);

}  // namespace mapf
