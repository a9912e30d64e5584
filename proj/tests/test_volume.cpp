#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "skelscreen/errors.hpp"
#include "skelscreen/volume.hpp"

using namespace skelscreen;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("skelscreen_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

std::vector<char> read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in),
            std::istreambuf_iterator<char>()};
}

} // namespace

TEST_CASE("load_volume reads a 2x2x2 header + 16-byte raw") {
    const fs::path dir = temp_dir("vol_small");
    write_text(dir / "v.hdr",
               "dims 2 2 2\nspacing_mm 0.06 0.06 0.06\ndata v.raw\n"
               "dtype i16le\n");
    {
        std::ofstream raw(dir / "v.raw", std::ios::binary);
        const int16_t vals[8] = {0, 1, 2, 3, 4, 5, 6, 7};
        raw.write(reinterpret_cast<const char*>(vals), 16);
    }
    const VoxelVolume v = load_volume(dir / "v.hdr");
    CHECK(v.voxel_count() == 8);
    CHECK(v.at(1, 0, 0) == 1);
    CHECK(v.at(0, 1, 0) == 2);
    CHECK(v.at(0, 0, 1) == 4); // x-fastest ordering
    CHECK(v.spacing_mm[0] == doctest::Approx(0.06));
}

TEST_CASE("volume error families are distinct") {
    const fs::path dir = temp_dir("vol_errors");

    ErrorCode missing = ErrorCode::ok;
    try {
        load_volume(dir / "absent.hdr");
    } catch (const Error& e) {
        missing = e.code();
    }
    CHECK(missing == ErrorCode::missing_file);

    // dims 3x3x3 against a 16-byte raw file.
    write_text(dir / "m.hdr",
               "dims 3 3 3\nspacing_mm 0.06 0.06 0.06\ndata m.raw\n"
               "dtype i16le\n");
    {
        std::ofstream raw(dir / "m.raw", std::ios::binary);
        const char zeros[16] = {};
        raw.write(zeros, 16);
    }
    ErrorCode mismatch = ErrorCode::ok;
    try {
        load_volume(dir / "m.hdr");
    } catch (const Error& e) {
        mismatch = e.code();
    }
    CHECK(mismatch == ErrorCode::size_mismatch);

    write_text(dir / "s.hdr",
               "dims 2 2 2\nspacing_mm 0 0.06 0.06\ndata m.raw\n"
               "dtype i16le\n");
    ErrorCode spacing = ErrorCode::ok;
    try {
        load_volume(dir / "s.hdr");
    } catch (const Error& e) {
        spacing = e.code();
    }
    CHECK(spacing == ErrorCode::bad_value);

    CHECK(missing != mismatch);
    CHECK(mismatch != spacing);
    CHECK(missing != spacing);
}

TEST_CASE("save/load round trip is byte-identical on the raw file") {
    const fs::path dir = temp_dir("vol_roundtrip");
    std::mt19937 rng(7);
    const VoxelVolume v = oracles::random_volume(rng, 8, 8, 8, -900, 1500);

    save_volume(v, dir / "a.hdr");
    const VoxelVolume loaded = load_volume(dir / "a.hdr");
    CHECK(loaded.dims == v.dims);
    CHECK(loaded.data == v.data);

    save_volume(loaded, dir / "b.hdr");
    CHECK(read_bytes(dir / "a.raw") == read_bytes(dir / "b.raw"));
}

TEST_CASE("label volume round trip") {
    const fs::path dir = temp_dir("vol_labels");
    LabelVolume lv;
    lv.dims = {3, 2, 2};
    lv.spacing_mm = {0.06, 0.06, 0.06};
    lv.data = {0, 1, 2, 0, 0, 3, 4, 0, 0, 0, 5, 65535};
    save_label_volume(lv, dir / "l.hdr");
    const LabelVolume back = load_label_volume(dir / "l.hdr");
    CHECK(back.data == lv.data);
    // dtype mismatch between the two formats is rejected
    CHECK_THROWS_AS(load_volume(dir / "l.hdr"), Error);
}

TEST_CASE("median filter: constants, impulse, and sort oracle") {
    VoxelVolume constant;
    constant.dims = {4, 4, 4};
    constant.spacing_mm = {0.06, 0.06, 0.06};
    constant.data.assign(64, 500);
    CHECK(median_filter3(constant).data == constant.data);

    VoxelVolume impulse;
    impulse.dims = {5, 5, 5};
    impulse.spacing_mm = {0.06, 0.06, 0.06};
    impulse.data.assign(125, 0);
    impulse.at(2, 2, 2) = 1000;
    const VoxelVolume f = median_filter3(impulse);
    CHECK(f.at(2, 2, 2) == 0); // 1 of 27 values cannot be the median

    std::mt19937 rng(11);
    const VoxelVolume v = oracles::random_volume(rng, 8, 8, 8, -500, 1200);
    const VoxelVolume filtered = median_filter3(v);
    for (int z = 0; z < 8; ++z) {
        for (int y = 0; y < 8; ++y) {
            for (int x = 0; x < 8; ++x) {
                REQUIRE(filtered.at(x, y, z) ==
                        oracles::median27_sort(v, x, y, z));
            }
        }
    }
}

TEST_CASE("median filter commutes with a global HU offset") {
    std::mt19937 rng(13);
    const VoxelVolume v = oracles::random_volume(rng, 6, 7, 5, -200, 900);
    VoxelVolume shifted = v;
    for (auto& s : shifted.data) s = static_cast<int16_t>(s + 37);
    const VoxelVolume a = median_filter3(shifted);
    const VoxelVolume b = median_filter3(v);
    for (size_t i = 0; i < a.data.size(); ++i) {
        REQUIRE(a.data[i] == b.data[i] + 37);
    }
}

TEST_CASE("median filter output values come from the input neighborhood") {
    std::mt19937 rng(17);
    const VoxelVolume v = oracles::random_volume(rng, 6, 6, 6, -100, 100);
    const VoxelVolume f = median_filter3(v);
    for (int z = 0; z < 6; ++z) {
        for (int y = 0; y < 6; ++y) {
            for (int x = 0; x < 6; ++x) {
                bool member = false;
                for (int dz = -1; dz <= 1 && !member; ++dz) {
                    for (int dy = -1; dy <= 1 && !member; ++dy) {
                        for (int dx = -1; dx <= 1 && !member; ++dx) {
                            const int cx = std::clamp(x + dx, 0, 5);
                            const int cy = std::clamp(y + dy, 0, 5);
                            const int cz = std::clamp(z + dz, 0, 5);
                            member = v.at(cx, cy, cz) == f.at(x, y, z);
                        }
                    }
                }
                REQUIRE(member);
            }
        }
    }
}
