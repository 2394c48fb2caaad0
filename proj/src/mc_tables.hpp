#pragma once

#include <cstdint>

namespace amfuse::mesh::detail {

// Cube corner offsets (x, y, z) in the table's numbering.
inline constexpr int kCornerOffset[8][3] = {
    {0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1},
    {0, 1, 0}, {1, 1, 0}, {1, 1, 1}, {0, 1, 1},
};

// Edge -> (corner a, corner b).
inline constexpr int kEdgeCorners[12][2] = {
    {0, 1}, {1, 2}, {2, 3}, {3, 0},
    {4, 5}, {5, 6}, {6, 7}, {7, 4},
    {0, 4}, {1, 5}, {2, 6}, {3, 7},
};

extern const std::int8_t kTriTable[256][16];

}  // namespace amfuse::mesh::detail
