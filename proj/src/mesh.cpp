#include "skelscreen/mesh.hpp"

#include <fstream>
#include <limits>
#include <unordered_map>

#include "skelscreen/errors.hpp"

namespace skelscreen {

namespace {

// Corner offsets (in voxel units) of the quad covering each face direction,
// wound counter-clockwise when viewed from outside the voxel.
struct FaceSpec {
    int dir[3];
    int corners[4][3];
};

constexpr FaceSpec kFaces[6] = {
    // -x
    {{-1, 0, 0}, {{0, 0, 0}, {0, 0, 1}, {0, 1, 1}, {0, 1, 0}}},
    // +x
    {{1, 0, 0}, {{1, 0, 0}, {1, 1, 0}, {1, 1, 1}, {1, 0, 1}}},
    // -y
    {{0, -1, 0}, {{0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1}}},
    // +y
    {{0, 1, 0}, {{0, 1, 0}, {0, 1, 1}, {1, 1, 1}, {1, 1, 0}}},
    // -z
    {{0, 0, -1}, {{0, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, 0, 0}}},
    // +z
    {{0, 0, 1}, {{0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}}},
};

} // namespace

TriangleMesh surface_mesh(const BoneInstance& b,
                          const std::array<double, 3>& spacing_mm) {
    if (b.voxels.empty()) {
        throw Error(ErrorCode::bad_value, "cannot mesh an empty instance");
    }

    // Local dense occupancy over the instance bounding box.
    GridCoord lo = b.voxels.front(), hi = b.voxels.front();
    for (const GridCoord& c : b.voxels) {
        lo.x = std::min(lo.x, c.x);
        lo.y = std::min(lo.y, c.y);
        lo.z = std::min(lo.z, c.z);
        hi.x = std::max(hi.x, c.x);
        hi.y = std::max(hi.y, c.y);
        hi.z = std::max(hi.z, c.z);
    }
    const int bx = hi.x - lo.x + 1, by = hi.y - lo.y + 1, bz = hi.z - lo.z + 1;
    std::vector<uint8_t> occ(static_cast<size_t>(bx) * by * bz, 0);
    auto occ_index = [&](int x, int y, int z) {
        return static_cast<size_t>(x) +
               static_cast<size_t>(bx) *
                   (static_cast<size_t>(y) + static_cast<size_t>(by) * z);
    };
    for (const GridCoord& c : b.voxels) {
        occ[occ_index(c.x - lo.x, c.y - lo.y, c.z - lo.z)] = 1;
    }
    auto occupied = [&](int x, int y, int z) {
        if (x < 0 || x >= bx || y < 0 || y >= by || z < 0 || z >= bz)
            return false;
        return occ[occ_index(x, y, z)] != 0;
    };

    TriangleMesh mesh;
    std::unordered_map<std::int64_t, int> corner_to_vertex;
    const std::int64_t kx = 1, ky = static_cast<std::int64_t>(bx) + 2,
                       kz = ky * (static_cast<std::int64_t>(by) + 2);
    auto vertex_at = [&](int cx, int cy, int cz) {
        const std::int64_t key = kx * cx + ky * cy + kz * cz;
        auto it = corner_to_vertex.find(key);
        if (it != corner_to_vertex.end()) return it->second;
        const int idx = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back({(lo.x + cx) * spacing_mm[0],
                                 (lo.y + cy) * spacing_mm[1],
                                 (lo.z + cz) * spacing_mm[2]});
        corner_to_vertex.emplace(key, idx);
        return idx;
    };

    // Voxels are pre-sorted lexicographically, so the output is deterministic.
    for (const GridCoord& c : b.voxels) {
        const int x = c.x - lo.x, y = c.y - lo.y, z = c.z - lo.z;
        for (const FaceSpec& f : kFaces) {
            if (occupied(x + f.dir[0], y + f.dir[1], z + f.dir[2])) continue;
            int q[4];
            for (int i = 0; i < 4; ++i) {
                q[i] = vertex_at(x + f.corners[i][0], y + f.corners[i][1],
                                 z + f.corners[i][2]);
            }
            mesh.triangles.push_back({q[0], q[1], q[2]});
            mesh.triangles.push_back({q[0], q[2], q[3]});
        }
    }
    return mesh;
}

void write_ply(const TriangleMesh& mesh, const std::filesystem::path& path) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::missing_file,
                        "cannot create PLY file: " + path.string());
        }
        out << "ply\nformat ascii 1.0\n";
        out << "element vertex " << mesh.vertices.size() << '\n';
        out << "property float x\nproperty float y\nproperty float z\n";
        out << "element face " << mesh.triangles.size() << '\n';
        out << "property list uchar int vertex_indices\n";
        out << "end_header\n";
        out.precision(9);
        for (const auto& v : mesh.vertices) {
            out << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
        }
        for (const auto& t : mesh.triangles) {
            out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
        }
        if (!out) {
            throw Error(ErrorCode::bad_format,
                        "short write on PLY file: " + path.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

} // namespace skelscreen
