#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace oracles {

using skelscreen::GridCoord;
using skelscreen::VoxClass;
using skelscreen::VoxelClassMap;
using skelscreen::VoxelVolume;

int16_t median27_sort(const VoxelVolume& v, int x, int y, int z) {
    std::vector<int16_t> w;
    w.reserve(27);
    for (int dz = -1; dz <= 1; ++dz) {
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                const int cx = std::clamp(x + dx, 0, v.dims[0] - 1);
                const int cy = std::clamp(y + dy, 0, v.dims[1] - 1);
                const int cz = std::clamp(z + dz, 0, v.dims[2] - 1);
                w.push_back(v.at(cx, cy, cz));
            }
        }
    }
    std::sort(w.begin(), w.end());
    return w[13];
}

VoxelClassMap flood_scan(const VoxelVolume& v, const VoxelClassMap& m) {
    VoxelClassMap out = m;
    const int nx = m.dims[0], ny = m.dims[1], nz = m.dims[2];
    auto neighbors = [&](int x, int y, int z, auto&& fn) {
        for (int dz = -1; dz <= 1; ++dz) {
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0 && dz == 0) continue;
                    const int cx = x + dx, cy = y + dy, cz = z + dz;
                    if (cx < 0 || cx >= nx || cy < 0 || cy >= ny || cz < 0 ||
                        cz >= nz)
                        continue;
                    fn(cx, cy, cz);
                }
            }
        }
    };
    while (true) {
        bool found = false;
        int bx = 0, by = 0, bz = 0;
        int16_t best_hu = 0;
        // Highest-HU unresolved border voxel with a classified neighbor,
        // ties to the lexicographically smallest coordinate. The scan
        // visits coordinates in ascending lexicographic (x,y,z) order, so
        // strict > keeps the smallest tied coordinate.
        for (int x = 0; x < nx; ++x) {
            for (int y = 0; y < ny; ++y) {
                for (int z = 0; z < nz; ++z) {
                    if (out.at(x, y, z) != VoxClass::border) continue;
                    bool touches = false;
                    neighbors(x, y, z, [&](int cx, int cy, int cz) {
                        if (out.at(cx, cy, cz) != VoxClass::border) {
                            touches = true;
                        }
                    });
                    if (!touches) continue;
                    if (!found || v.at(x, y, z) > best_hu) {
                        found = true;
                        best_hu = v.at(x, y, z);
                        bx = x;
                        by = y;
                        bz = z;
                    }
                }
            }
        }
        if (!found) break;
        bool have = false;
        int16_t nb_hu = 0;
        GridCoord nb_coord{0, 0, 0};
        VoxClass nb_class = VoxClass::background;
        neighbors(bx, by, bz, [&](int cx, int cy, int cz) {
            if (out.at(cx, cy, cz) == VoxClass::border) return;
            const int16_t hu = v.at(cx, cy, cz);
            const GridCoord c{cx, cy, cz};
            if (!have || hu > nb_hu || (hu == nb_hu && c < nb_coord)) {
                have = true;
                nb_hu = hu;
                nb_coord = c;
                nb_class = out.at(cx, cy, cz);
            }
        });
        out.at(bx, by, bz) = nb_class;
    }
    for (auto& c : out.classes) {
        if (c == VoxClass::border) c = VoxClass::background;
    }
    return out;
}

FaceCount count_exposed_faces(const std::vector<GridCoord>& voxels) {
    std::set<std::array<int, 3>> occ;
    for (const GridCoord& c : voxels) occ.insert({c.x, c.y, c.z});
    constexpr int dirs[6][3] = {{-1, 0, 0}, {1, 0, 0},  {0, -1, 0},
                                {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
    FaceCount fc;
    std::set<std::array<int, 3>> corners;
    for (const auto& c : occ) {
        for (const auto& d : dirs) {
            if (occ.count({c[0] + d[0], c[1] + d[1], c[2] + d[2]})) continue;
            fc.faces++;
            // The face's 4 corners on the voxel-corner lattice.
            for (int a = 0; a <= 1; ++a) {
                for (int b = 0; b <= 1; ++b) {
                    std::array<int, 3> corner;
                    if (d[0] != 0) {
                        corner = {c[0] + (d[0] > 0 ? 1 : 0), c[1] + a,
                                  c[2] + b};
                    } else if (d[1] != 0) {
                        corner = {c[0] + a, c[1] + (d[1] > 0 ? 1 : 0),
                                  c[2] + b};
                    } else {
                        corner = {c[0] + a, c[1] + b,
                                  c[2] + (d[2] > 0 ? 1 : 0)};
                    }
                    corners.insert(corner);
                }
            }
        }
    }
    fc.corners = static_cast<std::int64_t>(corners.size());
    return fc;
}

void jacobi_eigen(const Eigen::MatrixXd& sym, Eigen::VectorXd& eigenvalues,
                  Eigen::MatrixXd& eigenvectors) {
    const int n = static_cast<int>(sym.rows());
    Eigen::MatrixXd a = sym;
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        }
        if (off < 1e-24) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) +
                                  std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                Eigen::MatrixXd rot = Eigen::MatrixXd::Identity(n, n);
                rot(p, p) = c;
                rot(q, q) = c;
                rot(p, q) = s;
                rot(q, p) = -s;
                a = rot.transpose() * a * rot;
                v = v * rot;
            }
        }
    }
    // Sort ascending by eigenvalue.
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return a(i, i) < a(j, j); });
    eigenvalues.resize(n);
    eigenvectors.resize(n, n);
    for (int i = 0; i < n; ++i) {
        eigenvalues[i] = a(order[i], order[i]);
        eigenvectors.col(i) = v.col(order[i]);
    }
}

VoxelVolume random_volume(std::mt19937& rng, int nx, int ny, int nz,
                          int16_t lo, int16_t hi) {
    VoxelVolume v;
    v.dims = {nx, ny, nz};
    v.spacing_mm = {0.06, 0.06, 0.06};
    v.data.resize(static_cast<size_t>(nx) * ny * nz);
    std::uniform_int_distribution<int> dist(lo, hi);
    for (auto& s : v.data) s = static_cast<int16_t>(dist(rng));
    return v;
}

Eigen::Matrix3d random_rotation(std::mt19937& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::Quaterniond q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    q.normalize();
    return q.toRotationMatrix();
}

} // namespace oracles
