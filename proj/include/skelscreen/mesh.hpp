#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "skelscreen/localize.hpp"

namespace skelscreen {

struct TriangleMesh {
    std::vector<std::array<double, 3>> vertices; // mm coordinates
    std::vector<std::array<int, 3>> triangles;   // vertex indices, CCW outward
};

// Triangulated 0.5-isosurface of the instance's binary occupancy field.
// The occupancy is piecewise constant per voxel, so the level set is the
// exact voxel boundary: every face between an occupied and an empty voxel
// contributes two triangles, with vertices welded on the voxel-corner
// lattice. A single voxel therefore meshes to the familiar 8-vertex,
// 12-triangle cube. Closed (watertight) for instances without internal
// cavities.
TriangleMesh surface_mesh(const BoneInstance& b,
                          const std::array<double, 3>& spacing_mm);

// ASCII PLY with `vertex` (x,y,z float) and `face` (vertex_indices) elements.
void write_ply(const TriangleMesh& mesh, const std::filesystem::path& path);

} // namespace skelscreen
