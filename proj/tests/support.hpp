#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "dtmnav/errors.hpp"
#include "dtmnav/geometry.hpp"
#include "dtmnav/random.hpp"
#include "dtmnav/simulation.hpp"
#include "dtmnav/terrain.hpp"

namespace dtmnav::test {

inline constexpr double kPi = std::numbers::pi;

inline double deg(double d) { return d * kPi / 180.0; }

inline Rotation random_rotation(Rng& rng) { return Rotation::exp(rng.uniform(0.0, kPi) * rng.unit_vector()); }

inline Pose random_pose(Rng& rng, double spread = 100.0) {
    return {random_rotation(rng), Vec3(rng.uniform(-spread, spread), rng.uniform(-spread, spread),
                                       rng.uniform(-spread, spread))};
}

inline double orthonormality_error(const Mat3& R) { return (R.transpose() * R - Mat3::Identity()).norm(); }

/// Grid sampling the plane z = a x + b y + c at its cell centres.
inline DtmGrid planar_grid(int ncols, int nrows, double cellsize, double a, double b, double c,
                           double origin_x = 0.0, double origin_y = 0.0) {
    std::vector<double> h(static_cast<std::size_t>(ncols) * nrows);
    for (int r = 0; r < nrows; ++r) {
        for (int col = 0; col < ncols; ++col) {
            const double x = origin_x + (col + 0.5) * cellsize;
            const double y = origin_y + (r + 0.5) * cellsize;
            h[static_cast<std::size_t>(r) * ncols + col] = a * x + b * y + c;
        }
    }
    return {ncols, nrows, origin_x, origin_y, cellsize, std::move(h)};
}

/// Rig flying 420 mm above a 950 x 1150 fractal terrain, moving 20 mm
/// between the two frames.
struct LabScene {
    DtmGrid dtm;
    CameraModel camera = make_ring_rig();
    Pose pose1;
    Pose pose2;

    NavState truth() const { return {pose1, relative_motion(pose1, pose2)}; }
};

inline LabScene lab_scene(std::uint64_t seed = 1, double relief = 320.0) {
    LabScene s{generate_fractal_terrain(seed, 950, 1150, 1.0, relief), make_ring_rig(), {}, {}};
    s.pose1 = {rotation_from_axis_angle(Vec3::UnitZ(), kPi / 2.0), Vec3(475.0, 560.0, 420.0)};
    s.pose2 = {s.pose1.R * rotation_from_axis_angle(Vec3(0.6, 0.0, 0.8), deg(0.5)), s.pose1.p + Vec3(2.0, 20.0, -1.0)};
    return s;
}

/// State perturbed by a translation of `mm` and a rotation of `angle` on
/// both the pose and the ego-motion.
inline NavState perturbed(const NavState& s, Rng& rng, double mm, double angle) {
    StateVector d;
    d << angle * rng.unit_vector(), mm * rng.unit_vector(), angle * rng.unit_vector(), mm * rng.unit_vector();
    return retract(s, d);
}

inline double position_error(const NavState& a, const NavState& b) { return (a.pose1.p - b.pose1.p).norm(); }

inline double angle_error(const NavState& a, const NavState& b) { return rotation_distance(a.pose1.R, b.pose1.R); }

}  // namespace dtmnav::test
