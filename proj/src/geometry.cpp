#include "reveca/geometry.hpp"

#include <cmath>
#include <cstdlib>

namespace reveca {

GridPos neighbor(GridPos p, Direction d) {
    switch (d) {
        case Direction::North: return {p.x, p.y - 1};
        case Direction::South: return {p.x, p.y + 1};
        case Direction::East: return {p.x + 1, p.y};
        case Direction::West: return {p.x - 1, p.y};
    }
    return p;
}

double euclidean(GridPos a, GridPos b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

int manhattan(GridPos a, GridPos b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

std::string_view to_string(Direction d) {
    switch (d) {
        case Direction::North: return "N";
        case Direction::South: return "S";
        case Direction::East: return "E";
        case Direction::West: return "W";
    }
    return "?";
}

std::optional<Direction> parse_direction(std::string_view s) {
    if (s == "N") return Direction::North;
    if (s == "S") return Direction::South;
    if (s == "E") return Direction::East;
    if (s == "W") return Direction::West;
    return std::nullopt;
}

GridMap::GridMap(int width, int height)
    : width_(width), height_(height),
      walkable_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0) {}

void GridMap::set_walkable(GridPos p, bool value) {
    if (in_bounds(p)) walkable_[index(p)] = value ? 1 : 0;
}

std::vector<GridPos> GridMap::walkable_neighbors(GridPos p) const {
    std::vector<GridPos> out;
    out.reserve(4);
    for (Direction d : kAllDirections) {
        GridPos n = neighbor(p, d);
        if (walkable(n)) out.push_back(n);
    }
    return out;
}

}  // namespace reveca
