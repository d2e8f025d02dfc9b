#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace reveca {

// Integer grid coordinate. One cell is one meter; +y points "south".
struct GridPos {
    int x = 0;
    int y = 0;

    auto operator<=>(const GridPos&) const = default;
};

enum class Direction { North, South, East, West };

inline constexpr Direction kAllDirections[] = {Direction::North, Direction::South,
                                               Direction::East, Direction::West};

GridPos neighbor(GridPos p, Direction d);
double euclidean(GridPos a, GridPos b);
int manhattan(GridPos a, GridPos b);

std::string_view to_string(Direction d);
std::optional<Direction> parse_direction(std::string_view s);

// Static occupancy grid. Walls and furniture are not walkable.
class GridMap {
public:
    GridMap() = default;
    GridMap(int width, int height);

    int width() const { return width_; }
    int height() const { return height_; }

    bool in_bounds(GridPos p) const {
        return p.x >= 0 && p.y >= 0 && p.x < width_ && p.y < height_;
    }
    bool walkable(GridPos p) const {
        return in_bounds(p) && walkable_[index(p)] != 0;
    }
    void set_walkable(GridPos p, bool value);

    std::size_t index(GridPos p) const {
        return static_cast<std::size_t>(p.y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(p.x);
    }

    std::vector<GridPos> walkable_neighbors(GridPos p) const;

    bool operator==(const GridMap&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<unsigned char> walkable_;
};

}  // namespace reveca
