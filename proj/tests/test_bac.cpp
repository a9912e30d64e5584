#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "skelscreen/bac.hpp"
#include "skelscreen/errors.hpp"

using namespace skelscreen;

namespace {

// A small asymmetric centroid cloud in canonical orientation: heavy mass
// at +x (the head), lateral bow toward +y, ventral mass below the axis.
FeatureMatrix canonical_cloud() {
    FeatureMatrix m;
    m.stage = FeatureStage::raw;
    // columns: n_voxels, cx, cy, cz, l1, l2, l3, major
    const std::vector<std::array<double, 4>> rows = {
        // weight, x, y, z
        {900, 10.0, 0.0, 0.2},   // skull
        {150, 8.0, 0.4, 0.5},    {140, 6.5, 0.7, 0.6},
        {130, 5.0, 0.8, 0.65},   {120, 3.5, 0.7, 0.6},
        {110, 2.0, 0.4, 0.5},    {100, 0.5, 0.1, 0.3},
        {90, -1.0, -0.1, 0.2},   {85, -2.5, -0.2, 0.1},
        {80, -4.0, -0.2, 0.05},  {75, -5.5, -0.1, 0.0},
        {70, -7.0, 0.0, -0.05},  {60, 5.0, 2.2, -0.6},
        {60, 5.0, -1.4, -0.6},   {55, 1.0, 1.9, -0.7},
        {55, 1.0, -1.2, -0.7},   {50, -3.0, 1.6, -0.8},
        {50, -3.0, -1.1, -0.8},
    };
    m.values.resize(static_cast<int>(rows.size()), 8);
    for (size_t i = 0; i < rows.size(); ++i) {
        m.values.row(static_cast<int>(i)) << rows[i][0], rows[i][1],
            rows[i][2], rows[i][3], 0.1, 0.2, 0.3, 1.0;
        m.bone_ids.push_back(static_cast<int>(i) + 1);
    }
    return m;
}

FeatureMatrix transformed(const FeatureMatrix& m, const Eigen::Matrix3d& r,
                          const Eigen::Vector3d& t) {
    FeatureMatrix out = m;
    for (int i = 0; i < m.rows(); ++i) {
        const Eigen::Vector3d c = m.values.row(i).segment<3>(1).transpose();
        out.values.row(i).segment<3>(1) = (r * c + t).transpose();
    }
    return out;
}

} // namespace

TEST_CASE("fit_bac on an already-canonical cloud is near identity") {
    const FeatureMatrix m = canonical_cloud();
    const BodyFrame f = fit_bac(m);
    CHECK(!f.head_sign_flipped);
    // Rotation close to identity up to the axis-sign convention: x stays x.
    CHECK(f.rotation(0, 0) > 0.99);
    CHECK(std::abs(f.rotation.determinant() - 1.0) < 1e-9);
    CHECK((f.rotation * f.rotation.transpose() -
           Eigen::Matrix3d::Identity())
              .cwiseAbs()
              .maxCoeff() < 1e-9);
}

TEST_CASE("apply_bac column selectivity") {
    const FeatureMatrix m = canonical_cloud();

    SUBCASE("identity frame leaves the matrix unchanged") {
        BodyFrame id;
        const FeatureMatrix out = apply_bac(m, id);
        CHECK((out.values - m.values).cwiseAbs().maxCoeff() == 0.0);
        CHECK(out.stage == FeatureStage::bac);
    }
    SUBCASE("pure translation shifts centroid columns only") {
        BodyFrame f;
        f.translation_mm = Eigen::Vector3d(1.0, -2.0, 3.0);
        const FeatureMatrix out = apply_bac(m, f);
        for (int i = 0; i < m.rows(); ++i) {
            CHECK(out.values(i, 0) == m.values(i, 0));
            CHECK(out.values(i, 1) == doctest::Approx(m.values(i, 1) + 1.0));
            CHECK(out.values(i, 2) == doctest::Approx(m.values(i, 2) - 2.0));
            CHECK(out.values(i, 3) == doctest::Approx(m.values(i, 3) + 3.0));
            for (int c = 4; c < 8; ++c) {
                CHECK(out.values(i, c) == m.values(i, c));
            }
        }
    }
    SUBCASE("scalar columns are bitwise invariant under any frame") {
        std::mt19937 rng(3);
        for (int trial = 0; trial < 5; ++trial) {
            BodyFrame f;
            f.rotation = oracles::random_rotation(rng);
            f.translation_mm = Eigen::Vector3d::Random();
            const FeatureMatrix out = apply_bac(m, f);
            for (int i = 0; i < m.rows(); ++i) {
                CHECK(out.values(i, 0) == m.values(i, 0));
                for (int c = 4; c < 8; ++c) {
                    CHECK(out.values(i, c) == m.values(i, c));
                }
            }
        }
    }
}

TEST_CASE("rigid-motion equivariance of fit+apply") {
    const FeatureMatrix m = canonical_cloud();
    const BodyFrame base_frame = fit_bac(m);
    const FeatureMatrix base = apply_bac(m, base_frame);

    std::mt19937 rng(5);
    for (int trial = 0; trial < 25; ++trial) {
        const Eigen::Matrix3d r = oracles::random_rotation(rng);
        const Eigen::Vector3d t = 20.0 * Eigen::Vector3d::Random();
        const FeatureMatrix moved = transformed(m, r, t);
        const BodyFrame f = fit_bac(moved);
        const FeatureMatrix out = apply_bac(moved, f);
        const double err = (out.values - base.values).cwiseAbs().maxCoeff();
        REQUIRE(err < 1e-6);
    }
}

TEST_CASE("doubling the weights leaves the frame unchanged") {
    const FeatureMatrix m = canonical_cloud();
    FeatureMatrix doubled = m;
    doubled.values.col(0) *= 2.0;
    const BodyFrame a = fit_bac(m);
    const BodyFrame b = fit_bac(doubled);
    CHECK((a.rotation - b.rotation).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.translation_mm - b.translation_mm).norm() < 1e-12);
    CHECK(a.head_sign_flipped == b.head_sign_flipped);
}

TEST_CASE("head/tail flip engages when the cloud points tail-first") {
    const FeatureMatrix m = canonical_cloud();
    // Rotate 180 degrees about z: the heavy end now sits at -x.
    Eigen::Matrix3d r;
    r << -1, 0, 0, 0, -1, 0, 0, 0, 1;
    const FeatureMatrix moved = transformed(m, r, Eigen::Vector3d::Zero());
    const BodyFrame f = fit_bac(moved);
    const FeatureMatrix out = apply_bac(moved, f);
    const FeatureMatrix base = apply_bac(m, fit_bac(m));
    // Same canonical output regardless of the incoming orientation.
    CHECK((out.values - base.values).cwiseAbs().maxCoeff() < 1e-6);
    // The head (heaviest bone) ends at positive x.
    int heaviest = 0;
    for (int i = 1; i < out.rows(); ++i) {
        if (out.values(i, 0) > out.values(heaviest, 0)) heaviest = i;
    }
    CHECK(out.values(heaviest, 1) > 0.0);
}

TEST_CASE("degenerate inputs are rejected") {
    FeatureMatrix m;
    m.stage = FeatureStage::raw;
    m.values.resize(2, 8);
    m.values.setOnes();
    m.bone_ids = {1, 2};
    CHECK_THROWS_AS(fit_bac(m), Error); // fewer than 3 bones

    FeatureMatrix collinear;
    collinear.stage = FeatureStage::raw;
    collinear.values.resize(5, 8);
    for (int i = 0; i < 5; ++i) {
        collinear.values.row(i) << 10.0, static_cast<double>(i), 0.0, 0.0,
            0.1, 0.1, 0.1, 1.0;
        collinear.bone_ids.push_back(i + 1);
    }
    CHECK_THROWS_AS(fit_bac(collinear), Error); // rank-deficient covariance
}
