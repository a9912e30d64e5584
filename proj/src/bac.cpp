#include "skelscreen/bac.hpp"

#include <cmath>

#include "skelscreen/errors.hpp"

namespace skelscreen {

namespace {

struct WeightedCloud {
    Eigen::VectorXd w;        // normalized weights, sum 1
    Eigen::Matrix3Xd points;  // columns = centroids
    Eigen::Vector3d mean;
    Eigen::Matrix3d cov;
};

WeightedCloud weighted_cloud(const Eigen::Matrix3Xd& pts,
                             const Eigen::VectorXd& raw_w) {
    WeightedCloud c;
    c.points = pts;
    c.w = raw_w / raw_w.sum();
    c.mean = pts * c.w;
    c.cov.setZero();
    for (int i = 0; i < pts.cols(); ++i) {
        const Eigen::Vector3d d = pts.col(i) - c.mean;
        c.cov += c.w[i] * d * d.transpose();
    }
    return c;
}

// Weighted third central moment of projections onto a direction.
double skew_moment(const WeightedCloud& c, const Eigen::Vector3d& dir) {
    double m = 0.0;
    for (int i = 0; i < c.points.cols(); ++i) {
        const double q = dir.dot(c.points.col(i) - c.mean);
        m += c.w[i] * q * q * q;
    }
    return m;
}

// Minimal rotation taking unit vector a onto unit vector b.
Eigen::Matrix3d minimal_rotation(const Eigen::Vector3d& a,
                                 const Eigen::Vector3d& b) {
    const Eigen::Vector3d axis = a.cross(b);
    const double s = axis.norm();
    const double cth = a.dot(b);
    if (s < 1e-14) {
        // Parallel (anti-parallel never reaches here; callers sign-fix a).
        return Eigen::Matrix3d::Identity();
    }
    return Eigen::AngleAxisd(std::atan2(s, cth), axis / s).toRotationMatrix();
}

} // namespace

BodyFrame fit_bac(const FeatureMatrix& raw) {
    if (raw.cols() != 8 || raw.stage != FeatureStage::raw) {
        throw Error(ErrorCode::bad_value,
                    "fit_bac expects an 8-column Raw feature matrix");
    }
    const int n = raw.rows();
    if (n < 3) {
        throw Error(ErrorCode::underdetermined,
                    "fit_bac requires at least 3 bones");
    }

    Eigen::Matrix3Xd pts(3, n);
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) {
        w[i] = raw.values(i, 0);
        pts.col(i) = raw.values.row(i).segment<3>(1).transpose();
    }
    if (!(w.minCoeff() > 0.0)) {
        throw Error(ErrorCode::bad_value, "non-positive bone weight");
    }

    const WeightedCloud cloud = weighted_cloud(pts, w);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cloud.cov);
    const Eigen::Vector3d evals = eig.eigenvalues(); // ascending
    if (!(evals[1] > 1e-12 * std::max(evals[2], 1e-300))) {
        throw Error(ErrorCode::underdetermined,
                    "fit_bac: centroid cloud is collinear (rank-deficient "
                    "covariance)");
    }

    // Principal axes, descending variance. Solver signs are arbitrary; the
    // second axis is disambiguated by the sign of the mass skewness along
    // it (a pose-invariant quantity), the third follows from det = +1 and
    // the first is settled below by the head/tail mass rule.
    Eigen::Vector3d e1 = eig.eigenvectors().col(2);
    Eigen::Vector3d e2 = eig.eigenvectors().col(1);
    if (skew_moment(cloud, e2) < 0.0) e2 = -e2;
    const Eigen::Vector3d e3 = e1.cross(e2);

    Eigen::Matrix3d r1;
    r1.row(0) = e1.transpose();
    r1.row(1) = e2.transpose();
    r1.row(2) = e3.transpose();

    // Head/tail rule: compare voxel mass in the outer quartiles of the
    // primary-axis range; the heavier (skull) end must sit at +x.
    Eigen::VectorXd px(n);
    for (int i = 0; i < n; ++i) {
        px[i] = e1.dot(pts.col(i) - cloud.mean);
    }
    const double xmin = px.minCoeff(), xmax = px.maxCoeff();
    const double band = 0.25 * (xmax - xmin);
    double top_mass = 0.0, bottom_mass = 0.0;
    for (int i = 0; i < n; ++i) {
        if (px[i] >= xmax - band) top_mass += w[i];
        if (px[i] <= xmin + band) bottom_mass += w[i];
    }
    const bool flipped = top_mass < bottom_mass;
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    if (flipped) {
        flip.diagonal() << -1.0, 1.0, -1.0; // 180 degrees about y
    }

    const Eigen::Matrix3d r_head = flip * r1;

    // Step two: refine the spine direction from the tail half (negative x
    // after head correction).
    Eigen::Matrix3d r2 = Eigen::Matrix3d::Identity();
    {
        std::vector<int> tail;
        for (int i = 0; i < n; ++i) {
            const Eigen::Vector3d q = r_head * (pts.col(i) - cloud.mean);
            if (q.x() < 0.0) tail.push_back(i);
        }
        if (tail.size() >= 2) {
            Eigen::Matrix3Xd tpts(3, static_cast<int>(tail.size()));
            Eigen::VectorXd tw(static_cast<int>(tail.size()));
            for (size_t k = 0; k < tail.size(); ++k) {
                tpts.col(static_cast<int>(k)) =
                    r_head * (pts.col(tail[k]) - cloud.mean);
                tw[static_cast<int>(k)] = w[tail[k]];
            }
            const WeightedCloud tc = weighted_cloud(tpts, tw);
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> teig(tc.cov);
            if (teig.eigenvalues()[2] > 1e-12) {
                Eigen::Vector3d d = teig.eigenvectors().col(2);
                if (d.x() < 0.0) d = -d;
                r2 = minimal_rotation(d, Eigen::Vector3d::UnitX());
            }
        }
    }

    BodyFrame f;
    f.rotation = r2 * r_head;
    f.translation_mm = -f.rotation * cloud.mean;
    f.head_sign_flipped = flipped;
    return f;
}

FeatureMatrix apply_bac(const FeatureMatrix& raw, const BodyFrame& frame) {
    if (raw.cols() != 8) {
        throw Error(ErrorCode::bad_value,
                    "apply_bac expects an 8-column feature matrix");
    }
    FeatureMatrix out = raw;
    out.stage = FeatureStage::bac;
    for (int i = 0; i < raw.rows(); ++i) {
        const Eigen::Vector3d c = raw.values.row(i).segment<3>(1).transpose();
        out.values.row(i).segment<3>(1) = frame.apply(c).transpose();
    }
    return out;
}

} // namespace skelscreen
