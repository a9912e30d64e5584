#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace skelscreen {

// Dense micro-CT grid of Hounsfield units. Voxel (x,y,z) lives at linear
// index x + nx*(y + ny*z); the physical center of voxel (x,y,z) is
// ((x+0.5)*sx, (y+0.5)*sy, (z+0.5)*sz) mm.
struct VoxelVolume {
    std::array<int, 3> dims{0, 0, 0};
    std::array<double, 3> spacing_mm{0.0, 0.0, 0.0};
    std::vector<int16_t> data;

    std::int64_t voxel_count() const {
        return static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
    }
    std::int64_t index(int x, int y, int z) const {
        return x + static_cast<std::int64_t>(dims[0]) *
                       (y + static_cast<std::int64_t>(dims[1]) * z);
    }
    int16_t at(int x, int y, int z) const { return data[index(x, y, z)]; }
    int16_t& at(int x, int y, int z) { return data[index(x, y, z)]; }
    bool in_bounds(int x, int y, int z) const {
        return x >= 0 && x < dims[0] && y >= 0 && y < dims[1] && z >= 0 &&
               z < dims[2];
    }
};

// Companion grid of unsigned 16-bit labels (0 = background), same header
// format as VoxelVolume but dtype u16le. Used for instance and truth maps.
struct LabelVolume {
    std::array<int, 3> dims{0, 0, 0};
    std::array<double, 3> spacing_mm{0.0, 0.0, 0.0};
    std::vector<uint16_t> data;

    std::int64_t voxel_count() const {
        return static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
    }
    std::int64_t index(int x, int y, int z) const {
        return x + static_cast<std::int64_t>(dims[0]) *
                       (y + static_cast<std::int64_t>(dims[1]) * z);
    }
    uint16_t at(int x, int y, int z) const { return data[index(x, y, z)]; }
    uint16_t& at(int x, int y, int z) { return data[index(x, y, z)]; }
};

// Text header + raw little-endian payload. Header keys: dims, spacing_mm,
// data (raw file name relative to the header), dtype (i16le/u16le).
VoxelVolume load_volume(const std::filesystem::path& header_path);
void save_volume(const VoxelVolume& v, const std::filesystem::path& header_path);

LabelVolume load_label_volume(const std::filesystem::path& header_path);
void save_label_volume(const LabelVolume& v,
                       const std::filesystem::path& header_path);

// 3x3x3 median filter with edge-replicated borders. Dims and spacing are
// preserved; every output value is drawn from the input 27-neighborhood.
VoxelVolume median_filter3(const VoxelVolume& v);

} // namespace skelscreen
