#include "skelscreen/localize.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>

#include "skelscreen/errors.hpp"

namespace skelscreen {

namespace {

// All 26 neighbor offsets, fixed order.
constexpr int kNeighbors26[26][3] = {
    {-1, -1, -1}, {0, -1, -1}, {1, -1, -1}, {-1, 0, -1}, {0, 0, -1},
    {1, 0, -1},   {-1, 1, -1}, {0, 1, -1},  {1, 1, -1},  {-1, -1, 0},
    {0, -1, 0},   {1, -1, 0},  {-1, 0, 0},  {1, 0, 0},   {-1, 1, 0},
    {0, 1, 0},    {1, 1, 0},   {-1, -1, 1}, {0, -1, 1},  {1, -1, 1},
    {-1, 0, 1},   {0, 0, 1},   {1, 0, 1},   {-1, 1, 1},  {0, 1, 1},
    {1, 1, 1}};

struct FloodEntry {
    int16_t hu;
    GridCoord c;
};

// Priority: higher HU first, then lexicographically smaller coordinate.
struct FloodOrder {
    bool operator()(const FloodEntry& a, const FloodEntry& b) const {
        if (a.hu != b.hu) return a.hu < b.hu;
        return b.c < a.c;
    }
};

} // namespace

VoxelClassMap classify_voxels(const VoxelVolume& v, const HuThresholds& t) {
    VoxelClassMap m;
    m.dims = v.dims;
    m.classes.resize(v.data.size());
    for (size_t i = 0; i < v.data.size(); ++i) {
        const int16_t hu = v.data[i];
        if (hu < t.border_low) {
            m.classes[i] = VoxClass::background;
        } else if (hu > t.border_high) {
            m.classes[i] = VoxClass::bone;
        } else {
            m.classes[i] = VoxClass::border;
        }
    }
    return m;
}

VoxelClassMap watershed_resolve(const VoxelVolume& v, const VoxelClassMap& m) {
    if (v.dims != m.dims) {
        throw Error(ErrorCode::dimension_mismatch,
                    "class map dims do not match volume dims");
    }
    VoxelClassMap out = m;
    const int nx = m.dims[0], ny = m.dims[1], nz = m.dims[2];

    std::priority_queue<FloodEntry, std::vector<FloodEntry>, FloodOrder> queue;
    std::vector<uint8_t> queued(out.classes.size(), 0);

    auto enqueue_border_neighbors = [&](int x, int y, int z) {
        for (const auto& d : kNeighbors26) {
            const int cx = x + d[0], cy = y + d[1], cz = z + d[2];
            if (cx < 0 || cx >= nx || cy < 0 || cy >= ny || cz < 0 || cz >= nz)
                continue;
            const std::int64_t i = out.index(cx, cy, cz);
            if (out.classes[i] == VoxClass::border && !queued[i]) {
                queued[i] = 1;
                queue.push({v.data[i], GridCoord{cx, cy, cz}});
            }
        }
    };

    // Seed the queue with border voxels adjacent to an already-classified
    // voxel.
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                if (out.at(x, y, z) != VoxClass::border) {
                    enqueue_border_neighbors(x, y, z);
                }
            }
        }
    }

    while (!queue.empty()) {
        const FloodEntry e = queue.top();
        queue.pop();
        const std::int64_t i = out.index(e.c.x, e.c.y, e.c.z);
        if (out.classes[i] != VoxClass::border) continue;

        // Adopt the class of the highest-HU classified 26-neighbor; ties go
        // to the lexicographically smallest neighbor coordinate.
        bool found = false;
        int16_t best_hu = 0;
        GridCoord best_coord{0, 0, 0};
        VoxClass best_class = VoxClass::background;
        for (const auto& d : kNeighbors26) {
            const int cx = e.c.x + d[0], cy = e.c.y + d[1], cz = e.c.z + d[2];
            if (cx < 0 || cx >= nx || cy < 0 || cy >= ny || cz < 0 || cz >= nz)
                continue;
            const std::int64_t ni = out.index(cx, cy, cz);
            if (out.classes[ni] == VoxClass::border) continue;
            const int16_t hu = v.data[ni];
            const GridCoord nc{cx, cy, cz};
            if (!found || hu > best_hu || (hu == best_hu && nc < best_coord)) {
                found = true;
                best_hu = hu;
                best_coord = nc;
                best_class = out.classes[ni];
            }
        }
        if (!found) continue; // re-queued later via a classified neighbor
        out.classes[i] = best_class;
        enqueue_border_neighbors(e.c.x, e.c.y, e.c.z);
    }

    // Border components with no classified contact anywhere (e.g. an
    // all-border volume) cannot flood; treat them as background.
    for (auto& c : out.classes) {
        if (c == VoxClass::border) c = VoxClass::background;
    }
    return out;
}

std::vector<BoneInstance> connected_components(const VoxelClassMap& m,
                                               int min_bone_voxels) {
    for (const VoxClass c : m.classes) {
        if (c == VoxClass::border) {
            throw Error(ErrorCode::bad_value,
                        "connected_components requires a border-free map");
        }
    }
    const int nx = m.dims[0], ny = m.dims[1], nz = m.dims[2];
    std::vector<uint8_t> visited(m.classes.size(), 0);
    std::vector<BoneInstance> out;

    std::vector<GridCoord> stack;
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                const std::int64_t i = m.index(x, y, z);
                if (m.classes[i] != VoxClass::bone || visited[i]) continue;

                BoneInstance inst;
                stack.clear();
                stack.push_back({x, y, z});
                visited[i] = 1;
                while (!stack.empty()) {
                    const GridCoord c = stack.back();
                    stack.pop_back();
                    inst.voxels.push_back(c);
                    for (const auto& d : kNeighbors26) {
                        const int cx = c.x + d[0], cy = c.y + d[1],
                                  cz = c.z + d[2];
                        if (cx < 0 || cx >= nx || cy < 0 || cy >= ny ||
                            cz < 0 || cz >= nz)
                            continue;
                        const std::int64_t ni = m.index(cx, cy, cz);
                        if (m.classes[ni] == VoxClass::bone && !visited[ni]) {
                            visited[ni] = 1;
                            stack.push_back({cx, cy, cz});
                        }
                    }
                }
                if (static_cast<int>(inst.voxels.size()) >= min_bone_voxels) {
                    std::sort(inst.voxels.begin(), inst.voxels.end());
                    out.push_back(std::move(inst));
                }
            }
        }
    }

    std::sort(out.begin(), out.end(),
              [](const BoneInstance& a, const BoneInstance& b) {
                  return a.voxels.front() < b.voxels.front();
              });
    for (size_t k = 0; k < out.size(); ++k) {
        out[k].id = static_cast<int>(k) + 1;
    }
    return out;
}

namespace {

std::array<double, 3> voxel_centroid_mm(const BoneInstance& b,
                                        const std::array<double, 3>& sp) {
    double sx = 0, sy = 0, sz = 0;
    for (const GridCoord& c : b.voxels) {
        sx += (c.x + 0.5) * sp[0];
        sy += (c.y + 0.5) * sp[1];
        sz += (c.z + 0.5) * sp[2];
    }
    const double n = static_cast<double>(b.voxels.size());
    return {sx / n, sy / n, sz / n};
}

double dist3(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

bool lex_less(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    if (a[0] != b[0]) return a[0] < b[0];
    if (a[1] != b[1]) return a[1] < b[1];
    return a[2] < b[2];
}

} // namespace

void split_fetuses(std::vector<BoneInstance>& bones,
                   const std::array<double, 3>& spacing_mm) {
    if (bones.empty()) {
        throw Error(ErrorCode::bad_value, "split_fetuses on empty bone list");
    }
    for (auto& b : bones) b.fetus_id = 0;
    if (bones.size() < 2) return;

    std::vector<std::array<double, 3>> pts(bones.size());
    for (size_t i = 0; i < bones.size(); ++i) {
        pts[i] = voxel_centroid_mm(bones[i], spacing_mm);
    }

    // Initialize from the two mutually farthest centroids.
    size_t ia = 0, ib = 1;
    double best = -1.0;
    for (size_t i = 0; i < pts.size(); ++i) {
        for (size_t j = i + 1; j < pts.size(); ++j) {
            const double d = dist3(pts[i], pts[j]);
            if (d > best) {
                best = d;
                ia = i;
                ib = j;
            }
        }
    }
    std::array<double, 3> c0 = pts[ia], c1 = pts[ib];

    std::vector<int> assign(pts.size(), 0);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (size_t i = 0; i < pts.size(); ++i) {
            const int a = dist3(pts[i], c0) <= dist3(pts[i], c1) ? 0 : 1;
            if (a != assign[i]) {
                assign[i] = a;
                changed = true;
            }
        }
        std::array<double, 3> s0{0, 0, 0}, s1{0, 0, 0};
        int n0 = 0, n1 = 0;
        for (size_t i = 0; i < pts.size(); ++i) {
            auto& s = assign[i] == 0 ? s0 : s1;
            (assign[i] == 0 ? n0 : n1)++;
            for (int k = 0; k < 3; ++k) s[k] += pts[i][k];
        }
        if (n0 == 0 || n1 == 0) return; // collapsed: single cluster
        for (int k = 0; k < 3; ++k) {
            c0[k] = s0[k] / n0;
            c1[k] = s1[k] / n1;
        }
        if (!changed) break;
    }

    double r0 = 0, r1 = 0;
    for (size_t i = 0; i < pts.size(); ++i) {
        auto& c = assign[i] == 0 ? c0 : c1;
        auto& r = assign[i] == 0 ? r0 : r1;
        r = std::max(r, dist3(pts[i], c));
    }
    const double rmax = std::max(r0, r1);
    // Degenerate clusters (radius 0) never justify a split.
    if (rmax <= 0.0 || dist3(c0, c1) <= 2.0 * rmax) return;

    // Fetus 0 = cluster with the lexicographically smaller centroid.
    const bool swap_ids = !lex_less(c0, c1);
    for (size_t i = 0; i < bones.size(); ++i) {
        bones[i].fetus_id = swap_ids ? 1 - assign[i] : assign[i];
    }
}

std::vector<BoneInstance> instances_from_label_volume(const LabelVolume& lv) {
    std::map<uint16_t, BoneInstance> by_id;
    for (int z = 0; z < lv.dims[2]; ++z) {
        for (int y = 0; y < lv.dims[1]; ++y) {
            for (int x = 0; x < lv.dims[0]; ++x) {
                const uint16_t id = lv.at(x, y, z);
                if (id == 0) continue;
                BoneInstance& b = by_id[id];
                b.id = id;
                b.voxels.push_back({x, y, z});
            }
        }
    }
    std::vector<BoneInstance> out;
    out.reserve(by_id.size());
    for (auto& [id, b] : by_id) {
        std::sort(b.voxels.begin(), b.voxels.end());
        out.push_back(std::move(b));
    }
    return out;
}

LabelVolume instance_label_volume(const std::array<int, 3>& dims,
                                  const std::array<double, 3>& spacing_mm,
                                  const std::vector<BoneInstance>& bones) {
    LabelVolume lv;
    lv.dims = dims;
    lv.spacing_mm = spacing_mm;
    lv.data.assign(static_cast<size_t>(lv.voxel_count()), 0);
    for (const BoneInstance& b : bones) {
        if (b.id < 0 || b.id > 0xFFFF) {
            throw Error(ErrorCode::bad_value, "instance id out of u16 range");
        }
        for (const GridCoord& c : b.voxels) {
            lv.at(c.x, c.y, c.z) = static_cast<uint16_t>(b.id);
        }
    }
    return lv;
}

} // namespace skelscreen
