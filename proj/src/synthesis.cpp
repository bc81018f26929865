#include <cmath>

#include "dtmnav/random.hpp"
#include "dtmnav/simulation.hpp"

namespace dtmnav {

namespace {

constexpr std::uint64_t kSynthStream = 0x73796e;  // "syn"

}  // namespace

Vec3 perturb_direction(const Vec3& q, double sigma, Rng& rng) {
    if (sigma == 0.0) return q;
    Vec3 axis;
    do {
        const Vec3 v = rng.unit_vector();
        axis = v - v.dot(q) * q;
    } while (axis.norm() < 1e-6);
    const double angle = rng.normal(0.0, sigma);
    return (Rotation::exp(angle * axis.normalized()) * q).normalized();
}

SynthResult synth_correspondences(const DtmGrid& dtm, const CameraModel& model, const Pose& pose1, const Pose& pose2,
                                  std::size_t n, double sigma, std::uint64_t seed, const SynthOptions& options) {
    if (!(sigma >= 0.0)) throw NavError(ErrorCode::InvalidArgument, "direction noise must be non-negative");
    std::vector<std::size_t> cameras = options.cameras;
    if (cameras.empty()) {
        for (std::size_t c = 0; c < camera_count(model); ++c) cameras.push_back(c);
    }

    SynthResult out;
    out.requested = n * cameras.size();
    Rng rng(seed, kSynthStream);
    // a hit closer than the true point by more than this means occlusion
    const double occlusion_tol = 1e-3 * dtm.cellsize();

    for (std::size_t cam : cameras) {
        for (const FeatureMeasurement& m : measurement_grid(model, cam, n)) {
            const LineOfSight ray1 = ray_for_measurement(model, m);
            Vec3 ground;
            try {
                ground = raycast(dtm, apply_pose(pose1, ray1.source), pose1.R * ray1.direction).point;
            } catch (const NavError&) {
                continue;
            }

            const Vec3 c2p = apply_pose_inverse(pose2, ground);
            LineOfSight ray2;
            try {
                ray2.source = ray_for_measurement(model, project_point_in_camera(model, cam, c2p)).source;
            } catch (const NavError&) {
                continue;
            }
            ray2.direction = (c2p - ray2.source).normalized();

            if (options.occlusion_check) {
                const Vec3 ws2 = apply_pose(pose2, ray2.source);
                try {
                    const Vec3 hit = raycast(dtm, ws2, pose2.R * ray2.direction).point;
                    if ((hit - ws2).norm() < (ground - ws2).norm() - occlusion_tol) continue;
                } catch (const NavError&) {
                    continue;
                }
            }

            FeatureCorrespondence f{ray1, ray2};
            f.ray1.direction = perturb_direction(f.ray1.direction, sigma, rng);
            f.ray2.direction = perturb_direction(f.ray2.direction, sigma, rng);
            out.features.push_back(f);
            out.ground_points.push_back(ground);
            out.camera.push_back(cam);
        }
    }
    out.insufficient = out.features.size() < out.requested;
    return out;
}

}  // namespace dtmnav
