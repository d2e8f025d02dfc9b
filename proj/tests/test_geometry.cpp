#include <gtest/gtest.h>

#include "reveca/geometry.hpp"

using namespace reveca;

TEST(Geometry, Distances) {
    EXPECT_EQ(manhattan({0, 0}, {2, 3}), 5);
    EXPECT_DOUBLE_EQ(euclidean({0, 0}, {3, 4}), 5.0);
    EXPECT_DOUBLE_EQ(euclidean({1, 1}, {1, 1}), 0.0);
}

TEST(Geometry, NeighborsAndDirections) {
    EXPECT_EQ(neighbor({2, 2}, Direction::North), (GridPos{2, 1}));
    EXPECT_EQ(neighbor({2, 2}, Direction::South), (GridPos{2, 3}));
    EXPECT_EQ(neighbor({2, 2}, Direction::East), (GridPos{3, 2}));
    EXPECT_EQ(neighbor({2, 2}, Direction::West), (GridPos{1, 2}));
    for (Direction d : kAllDirections) EXPECT_EQ(parse_direction(to_string(d)), d);
    EXPECT_FALSE(parse_direction("Up"));
}

TEST(Geometry, GridBounds) {
    GridMap g(3, 2);
    EXPECT_FALSE(g.walkable({0, 0}));
    g.set_walkable({1, 1}, true);
    g.set_walkable({2, 1}, true);
    EXPECT_TRUE(g.walkable({1, 1}));
    EXPECT_FALSE(g.walkable({3, 1}));
    EXPECT_FALSE(g.walkable({-1, 0}));
    EXPECT_EQ(g.walkable_neighbors({1, 1}), (std::vector<GridPos>{{2, 1}}));
    EXPECT_EQ(g.index({2, 1}), 5u);
}
