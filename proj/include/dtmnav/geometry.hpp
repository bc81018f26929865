#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace dtmnav {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

/// Tolerance on | |q| - 1 | for vectors used as directions.
inline constexpr double kUnitTolerance = 1e-12;

/// Relative threshold on |n^T u| below which a ray counts as grazing a plane.
inline constexpr double kGrazeEpsilon = 1e-6;

/// Orthonormal rotation, det = +1. A matrix passed to the constructor is kept
/// as-is; compositions are re-orthonormalized so long products do not drift.
class Rotation {
public:
    Rotation() : m_(Mat3::Identity()) {}
    explicit Rotation(const Mat3& m) : m_(m) {}

    static Rotation identity() { return Rotation(); }
    static Rotation from_quaternion(const Eigen::Quaterniond& q);
    /// Exponential map of a rotation vector (axis * angle).
    static Rotation exp(const Vec3& rotation_vector);

    const Mat3& matrix() const { return m_; }
    Eigen::Quaterniond quaternion() const;
    /// Rotation vector with angle in [0, pi].
    Vec3 log() const;
    double angle() const;

    Rotation inverse() const { return Rotation(m_.transpose()); }
    Vec3 operator*(const Vec3& v) const { return m_ * v; }
    Rotation operator*(const Rotation& o) const { return Rotation(orthonormalized(m_ * o.m_)); }

    /// Body-frame (right-multiplied) increment: R * exp(delta).
    Rotation perturbed(const Vec3& delta) const { return *this * exp(delta); }

    /// One Newton-Schulz step towards the nearest orthonormal matrix; enough
    /// for matrices that are orthonormal up to rounding.
    static Mat3 orthonormalized(const Mat3& m) { return 0.5 * m * (3.0 * Mat3::Identity() - m.transpose() * m); }

private:
    Mat3 m_;
};

/// Camera-to-world transform: wv = R * cv + p.
struct Pose {
    Rotation R;
    Vec3 p = Vec3::Zero();

    static Pose identity() { return {}; }
};

/// Frame-1-to-frame-2 transform: c2v = R12 * c1v + p12, p12 in the second frame.
struct EgoMotion {
    Rotation R12;
    Vec3 p12 = Vec3::Zero();
};

/// Rodrigues rotation. Throws InvalidDirection if the axis is not unit length.
Rotation rotation_from_axis_angle(const Vec3& axis, double angle);

Vec3 apply_pose(const Pose& pose, const Vec3& cv);
Vec3 apply_pose_inverse(const Pose& pose, const Vec3& wv);

/// Ego-motion that carries frame-1 coordinates into frame-2 coordinates.
EgoMotion relative_motion(const Pose& pose1, const Pose& pose2);
/// Pose of the second frame implied by pose1 and the ego-motion.
Pose second_pose(const Pose& pose1, const EgoMotion& ego);

/// Oblique projector I - u n^T / (n^T u): projects along u onto the plane
/// normal to n. Throws GrazingRay when |n^T u| <= kGrazeEpsilon |u| |n|.
Mat3 projection_operator(const Vec3& u, const Vec3& n);

/// 2x3 matrix whose rows are an orthonormal basis of the complement of q.
Mat23 orthogonal_complement_basis(const Vec3& q);

Mat3 skew(const Vec3& v);

/// Geodesic angle between two rotations, in radians.
double rotation_distance(const Rotation& a, const Rotation& b);

bool is_unit(const Vec3& v, double tol = kUnitTolerance);

/// Throws InvalidDirection unless |v| is within tol of 1.
void require_unit(const Vec3& v, const char* what, double tol = 1e-9);

}  // namespace dtmnav
