#include "mapf/movingai.hpp"

#include <fstream>
#include <sstream>

#include "mapf/errors.hpp"

namespace mapf {

namespace {

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line(text.substr(pos, nl - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    pos = nl + 1;
  }
  return lines;
}

int header_int(const std::string& line, std::string_view key, int line_no) {
  std::istringstream is(line);
  std::string k;
  long v = 0;
  is >> k >> v;
  if (k != key || is.fail() || v < 1) {
    throw ParseError("expected '" + std::string(key) + " <n>'", line_no);
  }
  return static_cast<int>(v);
}

}  // namespace

GridMap parse_movingai(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.size() < 4) throw ParseError("truncated header", static_cast<int>(lines.size()));
  if (lines[0].rfind("type", 0) != 0) throw ParseError("expected 'type ...'", 1);
  const int height = header_int(lines[1], "height", 2);
  const int width = header_int(lines[2], "width", 3);
  if (lines[3] != "map") throw ParseError("expected 'map'", 4);

  if (static_cast<int>(lines.size()) < 4 + height) {
    throw ParseError("expected " + std::to_string(height) + " map rows",
                     static_cast<int>(lines.size()));
  }
  GridMap map(width, height);
  for (int r = 0; r < height; ++r) {
    const std::string& row = lines[static_cast<std::size_t>(r) + 4];
    const int line_no = r + 5;
    if (static_cast<int>(row.size()) != width) {
      throw ParseError("row has " + std::to_string(row.size()) + " symbols, expected " +
                           std::to_string(width),
                       line_no);
    }
    for (int c = 0; c < width; ++c) {
      switch (row[static_cast<std::size_t>(c)]) {
        case '.': case 'G':
          break;
        case '@': case 'O': case 'T': case 'W':
          map.set_blocked({r, c}, true);
          break;
        default:
          throw ParseError(std::string("unknown symbol '") + row[static_cast<std::size_t>(c)] + "'",
                           line_no);
      }
    }
  }
  return map;
}

GridMap parse_movingai_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_movingai(buf.str());
}

std::string to_movingai(const GridMap& map) {
  std::string out = "type octile\nheight " + std::to_string(map.height()) + "\nwidth " +
                    std::to_string(map.width()) + "\nmap\n";
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) out += map.is_blocked({r, c}) ? '@' : '.';
    out += '\n';
  }
  return out;
}

std::vector<GridMap> tile_map(const GridMap& map, int rows, int cols) {
  if (rows < 1 || cols < 1 || map.height() % rows != 0 || map.width() % cols != 0) {
    throw InvalidConfig("tile_map: tile grid must evenly divide the map");
  }
  const int th = map.height() / rows;
  const int tw = map.width() / cols;
  std::vector<GridMap> tiles;
  tiles.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
  for (int tr = 0; tr < rows; ++tr) {
    for (int tc = 0; tc < cols; ++tc) {
      GridMap t(tw, th);
      for (int r = 0; r < th; ++r) {
        for (int c = 0; c < tw; ++c) {
          t.set_blocked({r, c}, map.is_blocked({tr * th + r, tc * tw + c}));
        }
      }
      tiles.push_back(std::move(t));
    }
  }
  return tiles;
}

}  // namespace mapf
