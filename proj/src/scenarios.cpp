#include <algorithm>
#include <cmath>
#include <numbers>

#include "dtmnav/simulation.hpp"

namespace dtmnav {

namespace {

constexpr double kPi = std::numbers::pi;

// Mountainside layout: a planar face rising along +x from kWallFoot.
constexpr double kWallFoot = 350.0;
constexpr double kWallSlopeDeg = 60.0;
constexpr double kFloorRelief = 100.0;

}  // namespace

Scenario reference_scenario(std::uint64_t seed) {
    Scenario s{generate_fractal_terrain(seed, 950, 1150, 1.0, 320.0), {}};
    MissionConfig& m = s.mission;
    m.camera = make_ring_rig();
    m.trajectory.kind = TrajectoryKind::Line;
    m.trajectory.start.R = rotation_from_axis_angle(Vec3::UnitZ(), kPi / 2.0);  // rig x axis along +y
    m.trajectory.start.p = Vec3(475.0, 375.0, 420.0);
    m.trajectory.direction = Vec3::UnitY();
    m.trajectory.speed = 20.0 / 3.0;
    m.trajectory.duration = 60.0;
    m.trajectory.sample_rate = 10.0;
    m.direction_noise = 2e-4;
    m.seed = seed;
    m.drift.seed = seed;
    return s;
}

DtmGrid generate_mountainside_terrain(std::uint64_t seed, int ncols, int nrows, double cellsize) {
    const DtmGrid floor = generate_fractal_terrain(seed, ncols, nrows, cellsize, kFloorRelief);
    const double slope = std::tan(kWallSlopeDeg * kPi / 180.0);
    std::vector<double> h(floor.heights());
    for (int r = 0; r < nrows; ++r) {
        for (int c = 0; c < ncols; ++c) {
            const double wall = (floor.sample_x(c) - kWallFoot) * slope;
            double& v = h[static_cast<std::size_t>(r) * ncols + c];
            v = std::max(v, wall);
        }
    }
    return {ncols, nrows, floor.origin_x(), floor.origin_y(), cellsize, std::move(h)};
}

Scenario mountainside_scenario(std::uint64_t seed) {
    Scenario s{generate_mountainside_terrain(seed), {}};
    MissionConfig& m = s.mission;
    m.camera = make_ring_rig();
    m.trajectory.kind = TrajectoryKind::Line;
    m.trajectory.start.R = Rotation::identity();  // rig x axis (camera 0) faces the wall
    m.trajectory.start.p = Vec3(130.0, 300.0, 250.0);
    m.trajectory.direction = Vec3::UnitX();
    m.trajectory.speed = 20.0 / 3.0;
    m.trajectory.duration = 40.0;
    m.trajectory.sample_rate = 10.0;
    m.direction_noise = 2e-4;
    m.seed = seed;
    m.drift.seed = seed;
    return s;
}

}  // namespace dtmnav
