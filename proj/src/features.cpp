#include "skelscreen/features.hpp"

#include <fstream>
#include <limits>
#include <sstream>

#include "skelscreen/errors.hpp"

namespace skelscreen {

Eigen::Matrix<double, 8, 1> BoneFeatures::as_row() const {
    Eigen::Matrix<double, 8, 1> r;
    r << static_cast<double>(n_voxels), centroid_mm.x(), centroid_mm.y(),
        centroid_mm.z(), inertia_eigs_mm2.x(), inertia_eigs_mm2.y(),
        inertia_eigs_mm2.z(), major_axis_mm;
    return r;
}

BoneFeatures extract_features(const BoneInstance& b,
                              const std::array<double, 3>& spacing_mm) {
    if (b.voxels.empty()) {
        throw Error(ErrorCode::bad_value,
                    "cannot extract features from an empty instance");
    }
    const std::int64_t n = static_cast<std::int64_t>(b.voxels.size());

    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const GridCoord& c : b.voxels) {
        centroid += Eigen::Vector3d((c.x + 0.5) * spacing_mm[0],
                                    (c.y + 0.5) * spacing_mm[1],
                                    (c.z + 0.5) * spacing_mm[2]);
    }
    centroid /= static_cast<double>(n);

    // Unit-mass inertia tensor and position covariance about the centroid.
    Eigen::Matrix3d inertia = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const GridCoord& c : b.voxels) {
        const Eigen::Vector3d r =
            Eigen::Vector3d((c.x + 0.5) * spacing_mm[0],
                            (c.y + 0.5) * spacing_mm[1],
                            (c.z + 0.5) * spacing_mm[2]) -
            centroid;
        inertia += r.squaredNorm() * Eigen::Matrix3d::Identity() -
                   r * r.transpose();
        cov += r * r.transpose();
    }

    BoneFeatures f;
    f.n_voxels = n;
    f.centroid_mm = centroid;

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> inertia_eig(inertia);
    f.inertia_eigs_mm2 = inertia_eig.eigenvalues(); // ascending

    if (n == 1) {
        f.inertia_eigs_mm2.setZero();
        f.major_axis_mm = spacing_mm[0];
        return f;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> cov_eig(cov);
    const Eigen::Vector3d axis = cov_eig.eigenvectors().col(2);
    double pmin = std::numeric_limits<double>::infinity();
    double pmax = -std::numeric_limits<double>::infinity();
    for (const GridCoord& c : b.voxels) {
        const double p = axis.dot(Eigen::Vector3d((c.x + 0.5) * spacing_mm[0],
                                                  (c.y + 0.5) * spacing_mm[1],
                                                  (c.z + 0.5) * spacing_mm[2]));
        pmin = std::min(pmin, p);
        pmax = std::max(pmax, p);
    }
    int dominant = 0;
    for (int k = 1; k < 3; ++k) {
        if (std::abs(axis[k]) > std::abs(axis[dominant])) dominant = k;
    }
    f.major_axis_mm = (pmax - pmin) + spacing_mm[dominant];
    return f;
}

FeatureMatrix assemble_matrix(const std::vector<BoneFeatures>& features,
                              const std::vector<int>& bone_ids) {
    if (features.empty()) {
        throw Error(ErrorCode::bad_value, "cannot assemble an empty matrix");
    }
    if (features.size() != bone_ids.size()) {
        throw Error(ErrorCode::dimension_mismatch,
                    "feature/bone-id count mismatch");
    }
    FeatureMatrix m;
    m.stage = FeatureStage::raw;
    m.bone_ids = bone_ids;
    m.values.resize(static_cast<int>(features.size()), 8);
    for (size_t i = 0; i < features.size(); ++i) {
        m.values.row(static_cast<int>(i)) = features[i].as_row().transpose();
    }
    return m;
}

void write_feature_csv(const FeatureMatrix& m,
                       const std::filesystem::path& path) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::missing_file,
                        "cannot create feature CSV: " + path.string());
        }
        out.precision(17);
        if (m.cols() == 8 && (m.stage == FeatureStage::raw ||
                              m.stage == FeatureStage::bac)) {
            out << "bone_id,n_voxels,cx,cy,cz,l1,l2,l3,major_axis\n";
        } else {
            out << "bone_id";
            for (int c = 0; c < m.cols(); ++c) out << ",f" << c;
            out << '\n';
        }
        for (int r = 0; r < m.rows(); ++r) {
            out << m.bone_ids[r];
            for (int c = 0; c < m.cols(); ++c) out << ',' << m.values(r, c);
            out << '\n';
        }
    }
    std::filesystem::rename(tmp, path);
}

FeatureMatrix read_feature_csv(const std::filesystem::path& path,
                               FeatureStage stage) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::missing_file,
                    "cannot open feature CSV: " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(ErrorCode::bad_format, "empty feature CSV");
    }
    std::vector<std::vector<double>> rows;
    std::vector<int> ids;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> row;
        bool first = true;
        while (std::getline(ls, cell, ',')) {
            if (first) {
                ids.push_back(std::stoi(cell));
                first = false;
            } else {
                row.push_back(std::stod(cell));
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw Error(ErrorCode::bad_format, "ragged feature CSV");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw Error(ErrorCode::bad_format, "feature CSV has no data rows");
    }
    FeatureMatrix m;
    m.stage = stage;
    m.bone_ids = ids;
    m.values.resize(static_cast<int>(rows.size()),
                    static_cast<int>(rows.front().size()));
    for (size_t r = 0; r < rows.size(); ++r) {
        for (size_t c = 0; c < rows[r].size(); ++c) {
            m.values(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
        }
    }
    return m;
}

} // namespace skelscreen
