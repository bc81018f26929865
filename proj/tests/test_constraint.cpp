#include "doctest.h"
#include "dtmnav/constraint.hpp"
#include "support.hpp"

using namespace dtmnav;
using namespace dtmnav::test;

namespace {

NavState state_at(const Pose& pose1, const Pose& pose2) { return {pose1, relative_motion(pose1, pose2)}; }

NavState hover(double height) { return {{Rotation(), Vec3(0, 0, height)}, {Rotation(), Vec3::Zero()}}; }

DtmGrid flat(int n = 400) { return planar_grid(n, n, 1.0, 0.0, 0.0, 0.0, -n / 2.0, -n / 2.0); }

FeatureCorrespondence down(const Vec3& source, const Vec3& dir = -Vec3::UnitZ()) {
    return {{source, dir.normalized()}, {source, dir.normalized()}};
}

/// Line-plane intersection written as a parametric solve of
/// (o + t d - a) . n = 0, independent of the library code path.
double line_plane_parameter(const Vec3& o, const Vec3& d, const Vec3& a, const Vec3& n) {
    Eigen::Matrix<double, 1, 1> lhs;
    lhs(0, 0) = n.transpose() * d;
    Eigen::Matrix<double, 1, 1> rhs;
    rhs(0, 0) = n.transpose() * (a - o);
    return lhs.fullPivLu().solve(rhs)(0, 0);
}

/// Full 3-row constraint, evaluated by transforming the ray to the world,
/// intersecting it with the plane and mapping the hit into frame C2.
Vec3 three_row_residual(const NavState& s, const LinearizedFeature& f) {
    const Mat3 R1 = s.pose1.R.matrix();
    const Vec3 o = R1 * f.correspondence.ray1.source + s.pose1.p;
    const Vec3 d = R1 * f.correspondence.ray1.direction;
    const double t = line_plane_parameter(o, d, f.plane.point, f.plane.normal);
    const Vec3 g = o + t * d;
    const Vec3 c1 = R1.transpose() * (g - s.pose1.p);
    const Vec3 c2 = s.ego.R12.matrix() * c1 + s.ego.p12;
    const Vec3& q2 = f.correspondence.ray2.direction;
    return (Mat3::Identity() - q2 * q2.transpose()) * (c2 - f.correspondence.ray2.source);
}

/// Residual of the single-viewpoint formulation (all sources at the rig
/// origin), with the same operation order as the general one.
Vec2 central_residual(const NavState& s, const LinearizedFeature& f) {
    const Vec3& q1 = f.correspondence.ray1.direction;
    const Vec3 wq = s.pose1.R * q1;
    const double den = f.plane.normal.dot(wq);
    const Vec3 l_term = q1 * (f.plane.normal.dot(f.plane.point - s.pose1.p) / den);
    const Vec3 c2g = s.ego.p12 + s.ego.R12.matrix() * l_term;
    return orthogonal_complement_basis(f.correspondence.ray2.direction) * c2g;
}

std::vector<LinearizedFeature> linearized(const NavState& s, const std::vector<FeatureCorrespondence>& fs,
                                          const DtmGrid& dtm) {
    return linearize_all(s, fs, dtm).features;
}

/// Fourth-order Richardson extrapolation of central differences.
Eigen::MatrixXd richardson_jacobian(const NavState& s, const std::vector<LinearizedFeature>& fs, double h) {
    Eigen::MatrixXd J(2 * static_cast<Eigen::Index>(fs.size()), kStateDim);
    for (int j = 0; j < kStateDim; ++j) {
        auto central = [&](double step) {
            StateVector d = StateVector::Zero();
            d[j] = step;
            return Eigen::VectorXd((stack_residuals(retract(s, d), fs) - stack_residuals(retract(s, -d), fs)) /
                                   (2.0 * step));
        };
        J.col(j) = (4.0 * central(h / 2.0) - central(h)) / 3.0;
    }
    return J;
}

}  // namespace

TEST_SUITE("constraint") {
    TEST_CASE("linearize_feature examples") {
        const DtmGrid dtm = flat();
        const LinearizedFeature a = linearize_feature(hover(100), down(Vec3::Zero()), dtm);
        CHECK(a.plane.point.norm() < 1e-12);
        CHECK((a.plane.normal - Vec3::UnitZ()).norm() < 1e-12);

        const LinearizedFeature b = linearize_feature(hover(100), down(Vec3(5, 0, 0)), dtm);
        CHECK((b.plane.point - Vec3(5, 0, 0)).norm() < 1e-12);

        try {
            linearize_feature(hover(0.5), down(Vec3::Zero(), Vec3(1, 0, -1e-9)), dtm);
            FAIL("expected a rejection");
        } catch (const NavError& e) {
            CHECK((e.code() == ErrorCode::GrazingRay || e.code() == ErrorCode::NoIntersection));
        }
        // a ray exactly parallel to the plane never reaches it
        CHECK_THROWS_AS(linearize_feature(hover(1), down(Vec3::Zero(), Vec3::UnitX()), dtm), NavError);
    }

    TEST_CASE("grazing tangent plane is rejected") {
        const TangentPlane plane{Vec3::Zero(), Vec3::UnitZ()};
        try {
            depth_lambda(hover(100), {Vec3::Zero(), Vec3(1, 0, 1e-9).normalized()}, plane);
            FAIL("expected GrazingRay");
        } catch (const NavError& e) {
            CHECK(e.code() == ErrorCode::GrazingRay);
        }
    }

    TEST_CASE("depth examples") {
        const TangentPlane plane{Vec3::Zero(), Vec3::UnitZ()};
        CHECK(depth_lambda(hover(100), {Vec3::Zero(), -Vec3::UnitZ()}, plane) == doctest::Approx(100.0).epsilon(1e-15));
        CHECK(depth_lambda(hover(100), {Vec3::Zero(), Vec3(1, 0, -1).normalized()}, plane) ==
              doctest::Approx(100.0 * std::sqrt(2.0)).epsilon(1e-14));
    }

    TEST_CASE("depth agrees with a parametric line-plane oracle") {
        Rng rng(11);
        int checked = 0;
        for (int i = 0; i < 1000; ++i) {
            const NavState s{random_pose(rng), {}};
            const LineOfSight ray{Vec3(rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-30, 30)),
                                  rng.unit_vector()};
            const TangentPlane plane{Vec3(rng.uniform(-500, 500), rng.uniform(-500, 500), rng.uniform(-500, 500)),
                                     rng.unit_vector()};
            const Vec3 wq = s.pose1.R * ray.direction;
            if (std::abs(plane.normal.dot(wq)) <= 1e-3) continue;
            const double expected = line_plane_parameter(apply_pose(s.pose1, ray.source), wq, plane.point, plane.normal);
            CHECK(std::abs(depth_lambda(s, ray, plane) - expected) <= 1e-9 * std::max(1.0, std::abs(expected)));
            ++checked;
        }
        CHECK(checked > 900);
    }

    TEST_CASE("predicted ground point forms agree") {
        const TangentPlane plane{Vec3::Zero(), Vec3::UnitZ()};
        CHECK(predicted_ground_point(hover(100), {Vec3::Zero(), -Vec3::UnitZ()}, plane).norm() < 1e-12);

        // a source already on the plane is its own prediction
        const NavState on_plane = hover(0);
        const Vec3 g = predicted_ground_point(on_plane, {Vec3(3, 4, 0), Vec3(1, 1, -1).normalized()}, plane);
        CHECK((g - Vec3(3, 4, 0)).norm() < 1e-12);

        Rng rng(12);
        for (int i = 0; i < 1000; ++i) {
            const NavState s{random_pose(rng), {}};
            const LineOfSight ray{Vec3(rng.uniform(-30, 30), 0.0, rng.uniform(-30, 30)), rng.unit_vector()};
            const TangentPlane pl{Vec3(rng.uniform(-500, 500), rng.uniform(-500, 500), rng.uniform(-500, 500)),
                                  rng.unit_vector()};
            const Vec3 wq = s.pose1.R * ray.direction;
            if (std::abs(pl.normal.dot(wq)) <= 1e-2) continue;
            const Vec3 via_projection = predicted_ground_point(s, ray, pl);
            const Vec3 via_depth = world_source(s, ray) + depth_lambda(s, ray, pl) * wq;
            CHECK((via_projection - via_depth).norm() <= 1e-10 * std::max(1.0, via_depth.norm()));
            CHECK(std::abs(pl.normal.dot(via_projection - pl.point)) < 1e-9);
        }
    }

    TEST_CASE("transfer to the second frame") {
        const TangentPlane plane{Vec3::Zero(), Vec3::UnitZ()};
        const LineOfSight ray{Vec3::Zero(), -Vec3::UnitZ()};
        // identity rotation, zero ego-motion: C2 = C1, ground at (0, 0, -100)
        CHECK((transfer_to_second_frame(hover(100), ray, plane) - Vec3(0, 0, -100)).norm() < 1e-12);

        Rng rng(13);
        for (int i = 0; i < 1000; ++i) {
            const Pose p1 = random_pose(rng);
            NavState s = state_at(p1, random_pose(rng));
            const LineOfSight r{Vec3(rng.uniform(-30, 30), rng.uniform(-30, 30), 0.0), rng.unit_vector()};
            const TangentPlane pl{Vec3(rng.uniform(-500, 500), rng.uniform(-500, 500), rng.uniform(-500, 500)),
                                  rng.unit_vector()};
            if (std::abs(pl.normal.dot(s.pose1.R * r.direction)) <= 1e-2) continue;

            const Vec3 g = predicted_ground_point(s, r, pl);
            const Vec3 composed = s.ego.R12 * apply_pose_inverse(s.pose1, g) + s.ego.p12;
            const Vec3 direct = transfer_to_second_frame(s, r, pl);
            CHECK((direct - composed).norm() <= 1e-10 * std::max(1.0, composed.norm()));

            // zero ego-motion leaves the point in frame C1
            s.ego = {};
            CHECK((transfer_to_second_frame(s, r, pl) - apply_pose_inverse(s.pose1, g)).norm() <=
                  1e-10 * std::max(1.0, g.norm()));
        }
    }

    TEST_CASE("residual examples") {
        const DtmGrid dtm = flat();
        // stationary camera observing the same ray twice
        const NavState s = hover(100);
        const LinearizedFeature f = linearize_feature(s, down(Vec3(5, 3, 0), Vec3(0.2, -0.1, -1)), dtm);
        CHECK(residual(s, f).norm() < 1e-12);
    }

    TEST_CASE("residual matches an independent 3-row evaluation") {
        const LabScene scene = lab_scene(3);
        const NavState truth = scene.truth();
        const auto synth = synth_correspondences(scene.dtm, scene.camera, scene.pose1, scene.pose2, 40, 0.0, 3);
        const auto feats = linearized(truth, synth.features, scene.dtm);
        REQUIRE(feats.size() > 60);

        Rng rng(14);
        for (int trial = 0; trial < 20; ++trial) {
            NavState s = truth;
            s.ego.p12 += rng.uniform(0.01, 5.0) * rng.unit_vector();
            s.pose1.p += rng.uniform(0.0, 2.0) * rng.unit_vector();
            for (const LinearizedFeature& f : feats) {
                const Vec2 r = residual(s, f);
                const Vec3 oracle = three_row_residual(s, f);
                CHECK(std::abs(r.norm() - oracle.norm()) < 1e-12 * std::max(1.0, oracle.norm()) + 1e-12);
                // the 2-row form lifts back to the 3-row vector
                const Mat23 B = orthogonal_complement_basis(f.correspondence.ray2.direction);
                CHECK((B.transpose() * r - oracle).norm() < 1e-10);
            }
        }
    }

    TEST_CASE("single-feature rank is at most two") {
        Rng rng(15);
        for (int i = 0; i < 200; ++i) {
            const Vec3 q2 = rng.unit_vector();
            const Mat3 P = projection_operator(q2, q2);
            CHECK(Eigen::FullPivLU<Mat3>(P).setThreshold(1e-12).rank() <= 2);
            const Vec3 v = rng.uniform(0.1, 100.0) * rng.unit_vector();
            CHECK(std::abs((P * v).norm() - (orthogonal_complement_basis(q2) * v).norm()) < 1e-12);
        }
    }

    TEST_CASE("planar terrain makes the linearization exact") {
        const DtmGrid plane = planar_grid(950, 1150, 1.0, 0.12, -0.05, 30.0);
        const LabScene scene = lab_scene();
        const NavState truth = scene.truth();
        const std::vector<CameraModel> models{scene.camera, CentralPinhole{deg(100)}, ParabolicCatadioptric{}};
        for (const CameraModel& model : models) {
            Pose p1 = scene.pose1;
            if (std::holds_alternative<CentralPinhole>(model)) {
                // point the optical axis at the ground
                p1.R = p1.R * rotation_from_axis_angle(Vec3::UnitX(), kPi);
            }
            const Pose p2{p1.R * truth.ego.R12.inverse(), scene.pose2.p};
            const NavState s = state_at(p1, p2);
            const auto synth = synth_correspondences(plane, model, p1, p2, 400, 0.0, 5);
            const auto lin = linearize_all(s, synth.features, plane);
            REQUIRE(lin.features.size() > 20);
            double worst = 0.0;
            for (const auto& f : lin.features) worst = std::max(worst, residual(s, f).norm());
            CHECK(worst < 1e-10);
        }
    }

    TEST_CASE("zero sources collapse to the single-viewpoint constraint") {
        const LabScene scene = lab_scene(4);
        const CameraModel central_rig = make_ring_rig(3, 0.0);
        const NavState truth = scene.truth();
        const auto synth = synth_correspondences(scene.dtm, central_rig, scene.pose1, scene.pose2, 30, 2e-4, 4);
        Rng rng(16);
        const NavState s = perturbed(truth, rng, 3.0, deg(0.5));
        const auto feats = linearized(s, synth.features, scene.dtm);
        REQUIRE(feats.size() > 40);
        bool all_equal = true;
        for (const auto& f : feats) {
            CHECK(f.correspondence.ray1.source.norm() == 0.0);
            const Vec2 general = residual(s, f);
            const Vec2 central = central_residual(s, f);
            all_equal = all_equal && general == central;
        }
        CHECK(all_equal);
    }

    TEST_CASE("stacked shapes and rejection") {
        const LabScene scene = lab_scene(5);
        const NavState truth = scene.truth();
        const auto synth = synth_correspondences(scene.dtm, scene.camera, scene.pose1, scene.pose2, 10, 0.0, 5);
        const auto feats = linearized(truth, synth.features, scene.dtm);
        for (std::size_t n : {std::size_t{1}, std::size_t{5}, feats.size()}) {
            const std::span<const LinearizedFeature> sub(feats.data(), n);
            const StackedSystem sys = stack_residuals_and_jacobian(truth, sub, scene.dtm, false);
            CHECK(sys.residuals.size() == static_cast<Eigen::Index>(2 * n));
            CHECK(sys.jacobian.rows() == static_cast<Eigen::Index>(2 * n));
            CHECK(sys.jacobian.cols() == 12);
        }
        // 5 features give 10 rows: rank cannot reach 12
        const StackedSystem five =
            stack_residuals_and_jacobian(truth, std::span<const LinearizedFeature>(feats.data(), 5), scene.dtm, true);
        CHECK(Eigen::FullPivLU<Eigen::MatrixXd>(five.jacobian).rank() <= 10);

        // a state far above the terrain and pointing at the sky loses every feature
        NavState sky = truth;
        sky.pose1.R = sky.pose1.R * rotation_from_axis_angle(Vec3::UnitX(), kPi);
        try {
            stack_residuals_and_jacobian(sky, feats, scene.dtm, true);
            FAIL("expected AllFeaturesRejected");
        } catch (const NavError& e) {
            CHECK(e.code() == ErrorCode::AllFeaturesRejected);
        }
    }

    TEST_CASE("numeric Jacobian matches a Richardson reference") {
        const LabScene scene = lab_scene(6);
        const NavState truth = scene.truth();
        const auto synth = synth_correspondences(scene.dtm, scene.camera, scene.pose1, scene.pose2, 10, 0.0, 6);
        Rng rng(17);
        for (int i = 0; i < 10; ++i) {
            const NavState s = perturbed(truth, rng, 5.0, deg(1.0));
            const auto feats = linearized(s, synth.features, scene.dtm);
            const Eigen::MatrixXd J = numeric_jacobian(s, feats);
            const Eigen::MatrixXd ref = richardson_jacobian(s, feats, 1e-3);
            for (int j = 0; j < kStateDim; ++j) {
                CHECK((J.col(j) - ref.col(j)).norm() <= 1e-5 * ref.col(j).norm());
            }
        }
    }

    TEST_CASE("curvature bias shrinks with relief") {
        double previous = std::numeric_limits<double>::infinity();
        for (double relief : {40.0, 20.0, 10.0, 5.0}) {
            LabScene scene = lab_scene(7, relief);
            scene.pose1.p.z() = 120.0;
            scene.pose2.p.z() = 119.0;
            const NavState truth = scene.truth();
            const auto synth = synth_correspondences(scene.dtm, scene.camera, scene.pose1, scene.pose2, 50, 0.0, 7);
            // tangent planes taken at a displaced guess, so the plane point misses the true ground point
            Rng rng(18);
            const auto feats = linearized(perturbed(truth, rng, 2.0, deg(0.2)), synth.features, scene.dtm);
            REQUIRE(feats.size() > 100);
            double sum = 0.0;
            for (const auto& f : feats) sum += residual(truth, f).norm();
            const double mean = sum / static_cast<double>(feats.size());
            CHECK(mean < previous);
            previous = mean;
        }
    }
}
