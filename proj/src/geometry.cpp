#include "dtmnav/geometry.hpp"

#include <cmath>
#include <string>

#include "dtmnav/errors.hpp"

namespace dtmnav {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidDirection: return "InvalidDirection";
        case ErrorCode::GrazingRay: return "GrazingRay";
        case ErrorCode::OutOfBounds: return "OutOfBounds";
        case ErrorCode::NoDataCell: return "NoDataCell";
        case ErrorCode::NoIntersection: return "NoIntersection";
        case ErrorCode::StartsBelowTerrain: return "StartsBelowTerrain";
        case ErrorCode::MalformedHeader: return "MalformedHeader";
        case ErrorCode::RowLengthMismatch: return "RowLengthMismatch";
        case ErrorCode::OutOfFieldOfView: return "OutOfFieldOfView";
        case ErrorCode::UnknownCameraIndex: return "UnknownCameraIndex";
        case ErrorCode::NotVisible: return "NotVisible";
        case ErrorCode::AllFeaturesRejected: return "AllFeaturesRejected";
        case ErrorCode::RankDeficient: return "RankDeficient";
        case ErrorCode::TooFewFeatures: return "TooFewFeatures";
        case ErrorCode::DivergenceDetected: return "DivergenceDetected";
        case ErrorCode::TerrainCollision: return "TerrainCollision";
        case ErrorCode::TimestampMismatch: return "TimestampMismatch";
        case ErrorCode::InsufficientVisibleFeatures: return "InsufficientVisibleFeatures";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

Rotation Rotation::from_quaternion(const Eigen::Quaterniond& q) {
    const double n = q.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw NavError(ErrorCode::InvalidArgument, "zero or non-finite quaternion");
    }
    return Rotation(q.normalized().toRotationMatrix());
}

Rotation Rotation::exp(const Vec3& w) {
    const double theta2 = w.squaredNorm();
    const Mat3 K = skew(w);
    if (theta2 < 1e-16) {
        // second-order series; exact to double precision at this size
        return Rotation(Mat3::Identity() + K + 0.5 * K * K);
    }
    const double theta = std::sqrt(theta2);
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / theta2;
    return Rotation(Mat3::Identity() + a * K + b * K * K);
}

Eigen::Quaterniond Rotation::quaternion() const {
    Eigen::Quaterniond q(m_);
    q.normalize();
    // canonical hemisphere so that file output is stable
    if (q.w() < 0.0) q.coeffs() *= -1.0;
    return q;
}

Vec3 Rotation::log() const {
    const Eigen::AngleAxisd aa(quaternion());
    return aa.angle() * aa.axis();
}

double Rotation::angle() const {
    const Eigen::Quaterniond q = quaternion();
    return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w()));
}

Rotation rotation_from_axis_angle(const Vec3& axis, double angle) {
    require_unit(axis, "rotation axis");
    return Rotation::exp(axis * angle);
}

Vec3 apply_pose(const Pose& pose, const Vec3& cv) { return pose.R.matrix() * cv + pose.p; }

Vec3 apply_pose_inverse(const Pose& pose, const Vec3& wv) {
    return pose.R.matrix().transpose() * (wv - pose.p);
}

EgoMotion relative_motion(const Pose& pose1, const Pose& pose2) {
    return {pose2.R.inverse() * pose1.R, pose2.R.matrix().transpose() * (pose1.p - pose2.p)};
}

Pose second_pose(const Pose& pose1, const EgoMotion& ego) {
    const Rotation R2 = pose1.R * ego.R12.inverse();
    return {R2, pose1.p - R2 * ego.p12};
}

Mat3 projection_operator(const Vec3& u, const Vec3& n) {
    const double d = n.dot(u);
    if (!(std::abs(d) > kGrazeEpsilon * u.norm() * n.norm())) {
        throw NavError(ErrorCode::GrazingRay, "ray nearly parallel to plane (n.u = " + std::to_string(d) + ")");
    }
    return Mat3::Identity() - (u * n.transpose()) / d;
}

Mat23 orthogonal_complement_basis(const Vec3& q) {
    // helper axis least aligned with q
    Vec3 helper = Vec3::UnitX();
    const Vec3 a = q.cwiseAbs();
    if (a.y() <= a.x() && a.y() <= a.z()) {
        helper = Vec3::UnitY();
    } else if (a.z() <= a.x() && a.z() <= a.y()) {
        helper = Vec3::UnitZ();
    }
    const Vec3 b1 = q.cross(helper).normalized();
    const Vec3 b2 = q.cross(b1).normalized();
    Mat23 B;
    B.row(0) = b1.transpose();
    B.row(1) = b2.transpose();
    return B;
}

Mat3 skew(const Vec3& v) {
    Mat3 K;
    K << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
        -v.y(), v.x(), 0.0;
    return K;
}

double rotation_distance(const Rotation& a, const Rotation& b) {
    return (a.inverse() * b).angle();
}

bool is_unit(const Vec3& v, double tol) { return std::abs(v.norm() - 1.0) < tol; }

void require_unit(const Vec3& v, const char* what, double tol) {
    if (!v.allFinite() || !is_unit(v, tol)) {
        throw NavError(ErrorCode::InvalidDirection, std::string(what) + " is not unit length");
    }
}

}  // namespace dtmnav
