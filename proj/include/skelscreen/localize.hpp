#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "skelscreen/volume.hpp"

namespace skelscreen {

enum class VoxClass : uint8_t { background = 0, border = 1, bone = 2 };

struct VoxelClassMap {
    std::array<int, 3> dims{0, 0, 0};
    std::vector<VoxClass> classes;

    std::int64_t index(int x, int y, int z) const {
        return x + static_cast<std::int64_t>(dims[0]) *
                       (y + static_cast<std::int64_t>(dims[1]) * z);
    }
    VoxClass at(int x, int y, int z) const { return classes[index(x, y, z)]; }
    VoxClass& at(int x, int y, int z) { return classes[index(x, y, z)]; }
};

struct GridCoord {
    int x, y, z;
    friend bool operator==(const GridCoord&, const GridCoord&) = default;
    // Lexicographic (x, y, z) order; used wherever ties are broken by
    // "smallest grid coordinate".
    friend bool operator<(const GridCoord& a, const GridCoord& b) {
        if (a.x != b.x) return a.x < b.x;
        if (a.y != b.y) return a.y < b.y;
        return a.z < b.z;
    }
};

// One 26-connected bone component. Voxels are kept sorted lexicographically.
struct BoneInstance {
    int id = 0;
    int fetus_id = 0;
    std::vector<GridCoord> voxels;
    std::string volume_ref;
};

struct HuThresholds {
    int16_t border_low = 430;  // HU < border_low  -> background
    int16_t border_high = 580; // HU > border_high -> bone; else border
};

// Pure per-voxel classification against the HU thresholds. The border
// interval is closed on both ends.
VoxelClassMap classify_voxels(const VoxelVolume& v,
                              const HuThresholds& t = HuThresholds{});

// Marker-based flood that reassigns every border voxel to bone or
// background. Border voxels are visited in descending-HU order (ties by
// lexicographic coordinate) starting from those adjacent to a classified
// seed; each adopts the class of its highest-HU already-classified
// 26-neighbor. Bone/background seeds are never changed. A border component
// that touches no seed at all falls back to background.
VoxelClassMap watershed_resolve(const VoxelVolume& v, const VoxelClassMap& m);

// 26-connected components of the bone class; components smaller than
// min_bone_voxels are discarded. Instances are id'd 1..n in order of their
// lexicographically smallest member voxel.
std::vector<BoneInstance> connected_components(const VoxelClassMap& m,
                                               int min_bone_voxels = 10);

// 2-means split of bone centroids into up to two fetuses. The 2-cluster
// partition is accepted only when the clusters are non-degenerate and the
// inter-centroid distance exceeds twice the larger cluster radius;
// otherwise everything stays fetus 0. Fetus 0 is the cluster with the
// lexicographically smaller centroid.
void split_fetuses(std::vector<BoneInstance>& bones,
                   const std::array<double, 3>& spacing_mm);

// Export helpers: instance label volume (0 = background, k = instance id)
// and its inverse, so a dumped localization stage can be re-ingested.
LabelVolume instance_label_volume(const std::array<int, 3>& dims,
                                  const std::array<double, 3>& spacing_mm,
                                  const std::vector<BoneInstance>& bones);
std::vector<BoneInstance> instances_from_label_volume(const LabelVolume& lv);

} // namespace skelscreen
