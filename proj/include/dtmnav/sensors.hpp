#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "dtmnav/geometry.hpp"

namespace dtmnav {

/// Ray {S, q} of one feature: source point and unit direction, both in the
/// rig (camera system) frame.
struct LineOfSight {
    Vec3 source = Vec3::Zero();
    Vec3 direction = Vec3::UnitZ();
};

/// Pinhole with optical axis +z, x right, y down, square image. `fov` is the
/// full opening angle across the image width in radians.
struct CentralPinhole {
    double fov = 1.3962634015954636;  // 80 deg
};

struct RigCamera {
    Pose extrinsic;  // camera -> rig
    CentralPinhole camera;
};

/// Several pinholes with distinct centres: the non-central case.
struct MultiCameraRig {
    std::vector<RigCamera> cameras;
};

/// Orthographic camera looking at the parabolic mirror
/// z = (x^2 + y^2) / (4 f) - f, whose focus is the rig origin. Measurements
/// are mirror coordinates divided by 2f; `rim` bounds their radius.
struct ParabolicCatadioptric {
    double focal = 10.0;
    double rim = 2.0;
};

/// Explicit calibration table; measurement index selects the entry.
struct RayTable {
    std::vector<LineOfSight> rays;
};

using CameraModel = std::variant<CentralPinhole, MultiCameraRig, ParabolicCatadioptric, RayTable>;

/// Normalised image coordinates in camera `index` (or table entry `index`).
struct FeatureMeasurement {
    std::size_t index = 0;
    Vec2 xy = Vec2::Zero();
};

/// Throws InvalidArgument when the model violates its invariants.
void validate(const CameraModel& model);

/// Number of independently sampled image planes (1 except for rigs).
std::size_t camera_count(const CameraModel& model);

/// Throws OutOfFieldOfView or UnknownCameraIndex.
LineOfSight ray_for_measurement(const CameraModel& model, const FeatureMeasurement& m);

/// Inverse of ray_for_measurement; for rigs the camera whose optical axis is
/// best aligned with the point wins. Throws NotVisible.
FeatureMeasurement project_point(const CameraModel& model, const Vec3& rig_point);

/// Projection restricted to one camera of the model. Throws NotVisible or
/// UnknownCameraIndex.
FeatureMeasurement project_point_in_camera(const CameraModel& model, std::size_t camera, const Vec3& rig_point);

/// Regular grid of n measurements spanning camera `camera`'s image
/// (pinhole/rig: square image; catadioptric: the rim disk; ray table: entries).
std::vector<FeatureMeasurement> measurement_grid(const CameraModel& model, std::size_t camera, std::size_t n);

/// Three pinholes on a ring of radius `offset` about the rig origin, yawed
/// 0/120/240 deg, pitched down by `pitch_down`. Rig frame: x forward, z up.
MultiCameraRig make_ring_rig(std::size_t count = 3, double offset = 30.0, double fov = 1.3962634015954636,
                             double pitch_down = 0.7853981633974483);

/// Rig holding only the listed cameras, in the given order.
MultiCameraRig select_cameras(const MultiCameraRig& rig, const std::vector<std::size_t>& keep);

/// Rig configuration text: `camera.N.position = x y z`,
/// `camera.N.quaternion = w x y z`, `camera.N.fov_deg = 80`.
MultiCameraRig parse_rig(const std::string& text);
std::string format_rig(const MultiCameraRig& rig);
MultiCameraRig load_rig(const std::filesystem::path& path);
void save_rig(const MultiCameraRig& rig, const std::filesystem::path& path);

}  // namespace dtmnav
