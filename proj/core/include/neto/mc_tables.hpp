#pragma once

#include <array>

namespace neto {

/// Case table for marching cubes. Index bit v is set when the field value at
/// corner v is <= the isovalue; each row lists edge indices in triples,
/// terminated by -1.
extern const std::array<std::array<int, 16>, 256> kTriTable;

/// Corner pair spanned by each of the 12 cell edges.
extern const std::array<std::array<int, 2>, 12> kEdgeCorners;

/// Unit-cell offsets of the 8 corners: 0-3 ring the z=0 face, 4-7 the z=1
/// face, both counter-clockwise seen from -z.
extern const std::array<std::array<int, 3>, 8> kCornerOffsets;

}  // namespace neto
