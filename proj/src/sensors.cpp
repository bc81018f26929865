#include "dtmnav/sensors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "dtmnav/errors.hpp"
#include "dtmnav/format.hpp"

namespace dtmnav {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kFovSlack = 1e-12;

double half_extent(const CentralPinhole& cam) { return std::tan(0.5 * cam.fov); }

void validate_pinhole(const CentralPinhole& cam) {
    if (!(cam.fov > 0.0 && cam.fov < std::numbers::pi)) {
        throw NavError(ErrorCode::InvalidArgument, "pinhole fov must lie in (0, pi)");
    }
}

bool orthonormal(const Rotation& R) {
    const Mat3& m = R.matrix();
    return (m.transpose() * m - Mat3::Identity()).norm() < 1e-10 && std::abs(m.determinant() - 1.0) < 1e-10;
}

Vec3 pinhole_direction(const CentralPinhole& cam, const Vec2& xy) {
    const double t = half_extent(cam) + kFovSlack;
    if (std::abs(xy.x()) > t || std::abs(xy.y()) > t || !xy.allFinite()) {
        throw NavError(ErrorCode::OutOfFieldOfView, "measurement outside pinhole field of view");
    }
    return Vec3(xy.x(), xy.y(), 1.0).normalized();
}

bool pinhole_project(const CentralPinhole& cam, const Vec3& p, Vec2& xy) {
    if (!(p.z() > 0.0)) return false;
    xy = Vec2(p.x() / p.z(), p.y() / p.z());
    const double t = half_extent(cam) + kFovSlack;
    return std::abs(xy.x()) <= t && std::abs(xy.y()) <= t;
}

Vec3 catadioptric_direction(const ParabolicCatadioptric& cat, const Vec2& m) {
    if (!m.allFinite() || m.norm() > cat.rim + kFovSlack) {
        throw NavError(ErrorCode::OutOfFieldOfView, "measurement outside mirror rim");
    }
    // back-projected orthographic ray reflected at the mirror point; the
    // reflected ray passes through the focus (inverse stereographic map)
    const double r2 = m.squaredNorm();
    return Vec3(2.0 * m.x(), 2.0 * m.y(), r2 - 1.0) / (r2 + 1.0);
}

bool catadioptric_project(const ParabolicCatadioptric& cat, const Vec3& p, Vec2& m) {
    const double n = p.norm();
    if (!(n > 0.0)) return false;
    const Vec3 q = p / n;
    const double denom = 1.0 - q.z();
    if (denom < 1e-12) return false;
    m = Vec2(q.x() / denom, q.y() / denom);
    return m.norm() <= cat.rim + kFovSlack;
}

const RigCamera& rig_camera(const MultiCameraRig& rig, std::size_t index) {
    if (index >= rig.cameras.size()) {
        throw NavError(ErrorCode::UnknownCameraIndex, "camera index " + std::to_string(index) + " not in rig");
    }
    return rig.cameras[index];
}

FeatureMeasurement not_visible() { throw NavError(ErrorCode::NotVisible, "point outside every field of view"); }

bool raytable_hit(const LineOfSight& ray, const Vec3& p) {
    const Vec3 d = p - ray.source;
    const double dist = d.norm();
    if (!(dist > 0.0)) return false;
    if (d.dot(ray.direction) <= 0.0) return false;
    const Vec3 perp = d - ray.direction * ray.direction.dot(d);
    return perp.norm() <= 1e-9 * dist;
}

/// Evenly thinned selection of n items out of `count` candidates.
std::vector<std::size_t> thin(std::size_t count, std::size_t n) {
    std::vector<std::size_t> idx;
    if (n == 0 || count == 0) return idx;
    if (n >= count) {
        for (std::size_t i = 0; i < count; ++i) idx.push_back(i);
        return idx;
    }
    for (std::size_t i = 0; i < n; ++i) idx.push_back(i * count / n);
    return idx;
}

std::vector<Vec2> square_grid(std::size_t side_x, std::size_t side_y, double half) {
    std::vector<Vec2> pts;
    for (std::size_t r = 0; r < side_y; ++r) {
        for (std::size_t c = 0; c < side_x; ++c) {
            const double x = -half + (c + 0.5) * 2.0 * half / side_x;
            const double y = -half + (r + 0.5) * 2.0 * half / side_y;
            pts.emplace_back(x, y);
        }
    }
    return pts;
}

std::vector<FeatureMeasurement> pinhole_grid(const CentralPinhole& cam, std::size_t index, std::size_t n) {
    std::vector<FeatureMeasurement> out;
    if (n == 0) return out;
    const std::size_t rows = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(double(n)))));
    const std::size_t cols = (n + rows - 1) / rows;
    const auto pts = square_grid(cols, rows, half_extent(cam));
    for (std::size_t i : thin(pts.size(), n)) out.push_back({index, pts[i]});
    return out;
}

}  // namespace

void validate(const CameraModel& model) {
    std::visit(overloaded{
                   [](const CentralPinhole& cam) { validate_pinhole(cam); },
                   [](const MultiCameraRig& rig) {
                       if (rig.cameras.empty()) throw NavError(ErrorCode::InvalidArgument, "rig has no cameras");
                       for (const RigCamera& c : rig.cameras) {
                           validate_pinhole(c.camera);
                           if (!orthonormal(c.extrinsic.R)) {
                               throw NavError(ErrorCode::InvalidArgument, "rig extrinsic rotation not orthonormal");
                           }
                       }
                   },
                   [](const ParabolicCatadioptric& cat) {
                       if (!(cat.focal > 0.0) || !(cat.rim > 0.0)) {
                           throw NavError(ErrorCode::InvalidArgument, "catadioptric focal and rim must be positive");
                       }
                   },
                   [](const RayTable& table) {
                       if (table.rays.empty()) throw NavError(ErrorCode::InvalidArgument, "empty ray table");
                       for (const LineOfSight& r : table.rays) {
                           if (!is_unit(r.direction, 1e-12)) {
                               throw NavError(ErrorCode::InvalidArgument, "ray table direction not unit length");
                           }
                       }
                   },
               },
               model);
}

std::size_t camera_count(const CameraModel& model) {
    if (const auto* rig = std::get_if<MultiCameraRig>(&model)) return rig->cameras.size();
    return 1;
}

LineOfSight ray_for_measurement(const CameraModel& model, const FeatureMeasurement& m) {
    return std::visit(
        overloaded{
            [&](const CentralPinhole& cam) {
                if (m.index != 0) throw NavError(ErrorCode::UnknownCameraIndex, "single camera model");
                return LineOfSight{Vec3::Zero(), pinhole_direction(cam, m.xy)};
            },
            [&](const MultiCameraRig& rig) {
                const RigCamera& c = rig_camera(rig, m.index);
                const Vec3 q = c.extrinsic.R * pinhole_direction(c.camera, m.xy);
                return LineOfSight{c.extrinsic.p, q.normalized()};
            },
            [&](const ParabolicCatadioptric& cat) {
                if (m.index != 0) throw NavError(ErrorCode::UnknownCameraIndex, "single camera model");
                return LineOfSight{Vec3::Zero(), catadioptric_direction(cat, m.xy)};
            },
            [&](const RayTable& table) {
                if (m.index >= table.rays.size()) {
                    throw NavError(ErrorCode::UnknownCameraIndex, "ray table index out of range");
                }
                return table.rays[m.index];
            },
        },
        model);
}

FeatureMeasurement project_point_in_camera(const CameraModel& model, std::size_t camera, const Vec3& p) {
    return std::visit(overloaded{
                          [&](const CentralPinhole& cam) {
                              if (camera != 0) throw NavError(ErrorCode::UnknownCameraIndex, "single camera model");
                              Vec2 xy;
                              if (!pinhole_project(cam, p, xy)) return not_visible();
                              return FeatureMeasurement{0, xy};
                          },
                          [&](const MultiCameraRig& rig) {
                              const RigCamera& c = rig_camera(rig, camera);
                              Vec2 xy;
                              if (!pinhole_project(c.camera, apply_pose_inverse(c.extrinsic, p), xy)) {
                                  return not_visible();
                              }
                              return FeatureMeasurement{camera, xy};
                          },
                          [&](const ParabolicCatadioptric& cat) {
                              if (camera != 0) throw NavError(ErrorCode::UnknownCameraIndex, "single camera model");
                              Vec2 m;
                              if (!catadioptric_project(cat, p, m)) return not_visible();
                              return FeatureMeasurement{0, m};
                          },
                          [&](const RayTable& table) {
                              if (camera >= table.rays.size() || !raytable_hit(table.rays[camera], p)) {
                                  return not_visible();
                              }
                              return FeatureMeasurement{camera, Vec2::Zero()};
                          },
                      },
                      model);
}

FeatureMeasurement project_point(const CameraModel& model, const Vec3& p) {
    if (const auto* rig = std::get_if<MultiCameraRig>(&model)) {
        std::size_t best = rig->cameras.size();
        double best_cos = -std::numeric_limits<double>::infinity();
        FeatureMeasurement best_m;
        for (std::size_t i = 0; i < rig->cameras.size(); ++i) {
            const RigCamera& c = rig->cameras[i];
            Vec2 xy;
            const Vec3 local = apply_pose_inverse(c.extrinsic, p);
            if (!pinhole_project(c.camera, local, xy)) continue;
            const double cosang = local.z() / local.norm();
            if (cosang > best_cos) {
                best_cos = cosang;
                best = i;
                best_m = {i, xy};
            }
        }
        if (best == rig->cameras.size()) return not_visible();
        return best_m;
    }
    if (const auto* table = std::get_if<RayTable>(&model)) {
        for (std::size_t i = 0; i < table->rays.size(); ++i) {
            if (raytable_hit(table->rays[i], p)) return {i, Vec2::Zero()};
        }
        return not_visible();
    }
    return project_point_in_camera(model, 0, p);
}

std::vector<FeatureMeasurement> measurement_grid(const CameraModel& model, std::size_t camera, std::size_t n) {
    return std::visit(
        overloaded{
            [&](const CentralPinhole& cam) {
                if (camera != 0) throw NavError(ErrorCode::UnknownCameraIndex, "single camera model");
                return pinhole_grid(cam, 0, n);
            },
            [&](const MultiCameraRig& rig) { return pinhole_grid(rig_camera(rig, camera).camera, camera, n); },
            [&](const ParabolicCatadioptric& cat) {
                if (camera != 0) throw NavError(ErrorCode::UnknownCameraIndex, "single camera model");
                std::vector<FeatureMeasurement> out;
                if (n == 0) return out;
                // grow a square lattice until enough points fall inside the rim
                for (std::size_t side = 2;; ++side) {
                    std::vector<Vec2> inside;
                    for (const Vec2& p : square_grid(side, side, cat.rim)) {
                        if (p.norm() <= cat.rim) inside.push_back(p);
                    }
                    if (inside.size() >= n) {
                        for (std::size_t i : thin(inside.size(), n)) out.push_back({0, inside[i]});
                        return out;
                    }
                }
            },
            [&](const RayTable& table) {
                std::vector<FeatureMeasurement> out;
                for (std::size_t i : thin(table.rays.size(), n)) out.push_back({i, Vec2::Zero()});
                return out;
            },
        },
        model);
}

MultiCameraRig make_ring_rig(std::size_t count, double offset, double fov, double pitch_down) {
    MultiCameraRig rig;
    for (std::size_t k = 0; k < count; ++k) {
        const double yaw = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(count);
        const Vec3 forward(std::cos(yaw) * std::cos(pitch_down), std::sin(yaw) * std::cos(pitch_down),
                           -std::sin(pitch_down));
        const Vec3 right(std::sin(yaw), -std::cos(yaw), 0.0);
        const Vec3 down = forward.cross(right);
        Mat3 R;
        R.col(0) = right;
        R.col(1) = down;
        R.col(2) = forward;
        RigCamera cam;
        cam.extrinsic.R = Rotation(R);
        cam.extrinsic.p = offset * Vec3(std::cos(yaw), std::sin(yaw), 0.0);
        cam.camera.fov = fov;
        rig.cameras.push_back(cam);
    }
    return rig;
}

MultiCameraRig select_cameras(const MultiCameraRig& rig, const std::vector<std::size_t>& keep) {
    MultiCameraRig out;
    for (std::size_t i : keep) out.cameras.push_back(rig_camera(rig, i));
    return out;
}

MultiCameraRig parse_rig(const std::string& text) {
    const KeyValueFile kv = KeyValueFile::parse(text);
    std::map<long, RigCamera> cams;
    std::map<long, int> seen;
    for (const auto& [key, value] : kv.values()) {
        const auto parts = split(key, '.');
        if (parts.size() != 3 || parts[0] != "camera") {
            throw NavError(ErrorCode::ParseError, "unknown rig key '" + key + "'");
        }
        const auto idx = parse_double(parts[1]);
        if (!idx || *idx < 0 || *idx != std::floor(*idx)) {
            throw NavError(ErrorCode::ParseError, "bad camera index in '" + key + "'");
        }
        const long i = static_cast<long>(*idx);
        RigCamera& cam = cams[i];
        const std::vector<double> v = kv.numbers(key);
        if (parts[2] == "position") {
            if (v.size() != 3) throw NavError(ErrorCode::ParseError, key + " expects 3 numbers");
            cam.extrinsic.p = Vec3(v[0], v[1], v[2]);
            seen[i] |= 1;
        } else if (parts[2] == "quaternion") {
            if (v.size() != 4) throw NavError(ErrorCode::ParseError, key + " expects 4 numbers (w x y z)");
            cam.extrinsic.R = Rotation::from_quaternion(Eigen::Quaterniond(v[0], v[1], v[2], v[3]));
            seen[i] |= 2;
        } else if (parts[2] == "fov_deg") {
            if (v.size() != 1) throw NavError(ErrorCode::ParseError, key + " expects 1 number");
            cam.camera.fov = v[0] * std::numbers::pi / 180.0;
            seen[i] |= 4;
        } else {
            throw NavError(ErrorCode::ParseError, "unknown rig key '" + key + "'");
        }
    }
    MultiCameraRig rig;
    for (auto& [i, cam] : cams) {
        if (seen[i] != 7) {
            throw NavError(ErrorCode::ParseError,
                           "camera." + std::to_string(i) + " needs position, quaternion and fov_deg");
        }
        rig.cameras.push_back(cam);
    }
    validate(CameraModel(rig));
    return rig;
}

std::string format_rig(const MultiCameraRig& rig) {
    std::string out;
    for (std::size_t i = 0; i < rig.cameras.size(); ++i) {
        const RigCamera& c = rig.cameras[i];
        const std::string prefix = "camera." + std::to_string(i) + ".";
        const Eigen::Quaterniond q = c.extrinsic.R.quaternion();
        out += prefix + "position = " + format_double(c.extrinsic.p.x()) + " " + format_double(c.extrinsic.p.y()) +
               " " + format_double(c.extrinsic.p.z()) + "\n";
        out += prefix + "quaternion = " + format_double(q.w()) + " " + format_double(q.x()) + " " +
               format_double(q.y()) + " " + format_double(q.z()) + "\n";
        out += prefix + "fov_deg = " + format_double(c.camera.fov * 180.0 / std::numbers::pi) + "\n";
    }
    return out;
}

MultiCameraRig load_rig(const std::filesystem::path& path) { return parse_rig(read_text_file(path)); }

void save_rig(const MultiCameraRig& rig, const std::filesystem::path& path) {
    write_text_file(path, format_rig(rig));
}

}  // namespace dtmnav
