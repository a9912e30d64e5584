#include "skelscreen/volume.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "skelscreen/errors.hpp"

namespace skelscreen {

namespace {

struct HeaderFields {
    std::array<int, 3> dims{0, 0, 0};
    std::array<double, 3> spacing{0.0, 0.0, 0.0};
    std::string data_file;
    std::string dtype;
};

HeaderFields parse_header(const std::filesystem::path& header_path) {
    std::ifstream in(header_path);
    if (!in) {
        throw Error(ErrorCode::missing_file,
                    "cannot open volume header: " + header_path.string());
    }
    HeaderFields h;
    bool have_dims = false, have_spacing = false, have_data = false,
         have_dtype = false;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key) || key.empty() || key[0] == '#') continue;
        if (key == "dims") {
            if (!(ls >> h.dims[0] >> h.dims[1] >> h.dims[2])) {
                throw Error(ErrorCode::bad_format, "malformed dims line");
            }
            have_dims = true;
        } else if (key == "spacing_mm") {
            if (!(ls >> h.spacing[0] >> h.spacing[1] >> h.spacing[2])) {
                throw Error(ErrorCode::bad_format, "malformed spacing_mm line");
            }
            have_spacing = true;
        } else if (key == "data") {
            if (!(ls >> h.data_file)) {
                throw Error(ErrorCode::bad_format, "malformed data line");
            }
            have_data = true;
        } else if (key == "dtype") {
            if (!(ls >> h.dtype)) {
                throw Error(ErrorCode::bad_format, "malformed dtype line");
            }
            have_dtype = true;
        }
        // Unknown keys are ignored for forward compatibility.
    }
    if (!have_dims || !have_spacing || !have_data || !have_dtype) {
        throw Error(ErrorCode::bad_format,
                    "volume header missing required keys (dims, spacing_mm, "
                    "data, dtype): " +
                        header_path.string());
    }
    for (int d : h.dims) {
        if (d < 1) {
            throw Error(ErrorCode::bad_value,
                        "volume dims components must be >= 1");
        }
    }
    for (double s : h.spacing) {
        if (!(s > 0.0)) {
            throw Error(ErrorCode::bad_value,
                        "volume spacing_mm components must be > 0");
        }
    }
    return h;
}

template <typename T>
std::vector<T> read_raw_le(const std::filesystem::path& raw_path,
                           std::int64_t count) {
    std::ifstream in(raw_path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::missing_file,
                    "cannot open raw data file: " + raw_path.string());
    }
    in.seekg(0, std::ios::end);
    const std::int64_t bytes = static_cast<std::int64_t>(in.tellg());
    const std::int64_t expected = count * static_cast<std::int64_t>(sizeof(T));
    if (bytes != expected) {
        throw Error(ErrorCode::size_mismatch,
                    "raw data size mismatch: expected " +
                        std::to_string(expected) + " bytes, file has " +
                        std::to_string(bytes));
    }
    in.seekg(0, std::ios::beg);
    std::vector<T> out(static_cast<size_t>(count));
    in.read(reinterpret_cast<char*>(out.data()), expected);
    if (!in) {
        throw Error(ErrorCode::bad_format,
                    "short read on raw data file: " + raw_path.string());
    }
    // Raw files are little-endian on disk; this code targets little-endian
    // hosts only (checked once at load).
    static_assert(sizeof(T) == 2);
    const uint16_t probe = 1;
    uint8_t b;
    std::memcpy(&b, &probe, 1);
    if (b != 1) {
        throw Error(ErrorCode::bad_format,
                    "big-endian hosts are not supported");
    }
    return out;
}

template <typename T>
void write_raw(const std::filesystem::path& raw_path,
               const std::vector<T>& data) {
    const std::filesystem::path tmp = raw_path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::missing_file,
                        "cannot create raw data file: " + raw_path.string());
        }
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size() * sizeof(T)));
        if (!out) {
            throw Error(ErrorCode::bad_format,
                        "short write on raw data file: " + raw_path.string());
        }
    }
    std::filesystem::rename(tmp, raw_path);
}

void write_header(const std::filesystem::path& header_path,
                  const std::array<int, 3>& dims,
                  const std::array<double, 3>& spacing,
                  const std::string& data_file, const std::string& dtype) {
    const std::filesystem::path tmp = header_path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::missing_file,
                        "cannot create header file: " + header_path.string());
        }
        out << "dims " << dims[0] << ' ' << dims[1] << ' ' << dims[2] << '\n';
        out.precision(17);
        out << "spacing_mm " << spacing[0] << ' ' << spacing[1] << ' '
            << spacing[2] << '\n';
        out << "data " << data_file << '\n';
        out << "dtype " << dtype << '\n';
    }
    std::filesystem::rename(tmp, header_path);
}

std::filesystem::path raw_path_for(const std::filesystem::path& header_path,
                                   const std::string& data_file) {
    return header_path.parent_path() / data_file;
}

std::string default_raw_name(const std::filesystem::path& header_path) {
    std::filesystem::path p = header_path.filename();
    p.replace_extension(".raw");
    return p.string();
}

} // namespace

VoxelVolume load_volume(const std::filesystem::path& header_path) {
    const HeaderFields h = parse_header(header_path);
    if (h.dtype != "i16le") {
        throw Error(ErrorCode::bad_format,
                    "expected dtype i16le, got '" + h.dtype + "'");
    }
    VoxelVolume v;
    v.dims = h.dims;
    v.spacing_mm = h.spacing;
    v.data = read_raw_le<int16_t>(raw_path_for(header_path, h.data_file),
                                  v.voxel_count());
    return v;
}

void save_volume(const VoxelVolume& v,
                 const std::filesystem::path& header_path) {
    if (v.voxel_count() != static_cast<std::int64_t>(v.data.size())) {
        throw Error(ErrorCode::size_mismatch,
                    "volume data length does not match dims");
    }
    const std::string raw_name = default_raw_name(header_path);
    write_raw(header_path.parent_path() / raw_name, v.data);
    write_header(header_path, v.dims, v.spacing_mm, raw_name, "i16le");
}

LabelVolume load_label_volume(const std::filesystem::path& header_path) {
    const HeaderFields h = parse_header(header_path);
    if (h.dtype != "u16le") {
        throw Error(ErrorCode::bad_format,
                    "expected dtype u16le, got '" + h.dtype + "'");
    }
    LabelVolume v;
    v.dims = h.dims;
    v.spacing_mm = h.spacing;
    v.data = read_raw_le<uint16_t>(raw_path_for(header_path, h.data_file),
                                   v.voxel_count());
    return v;
}

void save_label_volume(const LabelVolume& v,
                       const std::filesystem::path& header_path) {
    if (v.voxel_count() != static_cast<std::int64_t>(v.data.size())) {
        throw Error(ErrorCode::size_mismatch,
                    "label volume data length does not match dims");
    }
    const std::string raw_name = default_raw_name(header_path);
    write_raw(header_path.parent_path() / raw_name, v.data);
    write_header(header_path, v.dims, v.spacing_mm, raw_name, "u16le");
}

VoxelVolume median_filter3(const VoxelVolume& v) {
    VoxelVolume out;
    out.dims = v.dims;
    out.spacing_mm = v.spacing_mm;
    out.data.resize(v.data.size());

    const int nx = v.dims[0], ny = v.dims[1], nz = v.dims[2];
    std::array<int16_t, 27> window;
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                int n = 0;
                for (int dz = -1; dz <= 1; ++dz) {
                    const int cz = std::clamp(z + dz, 0, nz - 1);
                    for (int dy = -1; dy <= 1; ++dy) {
                        const int cy = std::clamp(y + dy, 0, ny - 1);
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int cx = std::clamp(x + dx, 0, nx - 1);
                            window[n++] = v.at(cx, cy, cz);
                        }
                    }
                }
                std::nth_element(window.begin(), window.begin() + 13,
                                 window.end());
                out.at(x, y, z) = window[13];
            }
        }
    }
    return out;
}

} // namespace skelscreen
