#include "doctest.h"
#include "dtmnav/solver.hpp"
#include "support.hpp"

using namespace dtmnav;
using namespace dtmnav::test;

namespace {

/// `n` features spread evenly over the synthesized set.
std::vector<FeatureCorrespondence> pick(const std::vector<FeatureCorrespondence>& all, std::size_t n) {
    REQUIRE(all.size() >= n);
    std::vector<FeatureCorrespondence> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(all[i * all.size() / n]);
    return out;
}

std::vector<FeatureCorrespondence> features_for(const LabScene& s, std::size_t per_camera, double sigma,
                                                std::uint64_t seed) {
    return synth_correspondences(s.dtm, s.camera, s.pose1, s.pose2, per_camera, sigma, seed).features;
}

double state_distance(const NavState& a, const NavState& b) {
    return (a.pose1.p - b.pose1.p).norm() + (a.ego.p12 - b.ego.p12).norm() + rotation_distance(a.pose1.R, b.pose1.R) +
           rotation_distance(a.ego.R12, b.ego.R12);
}

bool bitwise_equal(const NavState& a, const NavState& b) {
    return a.pose1.R.matrix() == b.pose1.R.matrix() && a.pose1.p == b.pose1.p &&
           a.ego.R12.matrix() == b.ego.R12.matrix() && a.ego.p12 == b.ego.p12;
}

ErrorCode failure_of(std::span<const FeatureCorrespondence> f, const DtmGrid& dtm, const NavState& init,
                     const SolverConfig& cfg = {}) {
    try {
        solve(f, dtm, init, cfg);
    } catch (const EstimationError& e) {
        return e.code();
    }
    FAIL("solve succeeded");
    return ErrorCode::InvalidArgument;
}

/// The grid turned 90 degrees about z and shifted: (x, y, z) -> (n - y, x, z + dz)
/// with n the original row count. Bilinear interpolation commutes with it.
DtmGrid rotated_quarter(const DtmGrid& g, double dz) {
    const int cols = g.nrows();
    const int rows = g.ncols();
    std::vector<double> h(static_cast<std::size_t>(cols) * rows);
    for (int r = 0; r < g.nrows(); ++r) {
        for (int c = 0; c < g.ncols(); ++c) {
            h[static_cast<std::size_t>(c) * cols + (g.nrows() - 1 - r)] = g.at(c, r) + dz;
        }
    }
    return {cols, rows, 0.0, 0.0, g.cellsize(), std::move(h)};
}

}  // namespace

TEST_SUITE("solver") {
    TEST_CASE("configuration validation") {
        CHECK_NOTHROW(validate(SolverConfig{}));
        SolverConfig bad;
        bad.max_iterations = 0;
        CHECK_THROWS_AS(validate(bad), NavError);
        bad = {};
        bad.step_tolerance = 0.0;
        CHECK_THROWS_AS(validate(bad), NavError);
        bad = {};
        bad.huber_k = -1.0;
        CHECK_THROWS_AS(validate(bad), NavError);
    }

    TEST_CASE("huber weight and cost") {
        CHECK(huber_weight(0.0, 0.5) == 1.0);
        CHECK(huber_weight(0.5, 0.5) == 1.0);
        CHECK(huber_weight(1.0, 0.5) == 0.5);
        CHECK(huber_weight(7.0, 0.0) == 1.0);
        CHECK(huber_cost(0.2, 0.0) == doctest::Approx(0.02));
        CHECK(huber_cost(2.0, 1.0) == doctest::Approx(1.5));
        // continuous with a continuous derivative at k
        const double k = 0.3;
        CHECK(huber_cost(k * (1 + 1e-9), k) == doctest::Approx(huber_cost(k, k)).epsilon(1e-8));
    }

    TEST_CASE("conditioning report") {
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(20, 12);
        J.topRows(12).setIdentity();
        const Conditioning c = conditioning_report(J);
        CHECK(c.condition == doctest::Approx(1.0));
        CHECK(c.rank == 12);

        J(11, 11) = 0.0;
        const Conditioning d = conditioning_report(J);
        CHECK(d.rank == 11);
        CHECK(std::isinf(d.condition));
    }

    TEST_CASE("analytic and numeric Jacobians agree") {
        const LabScene scene = lab_scene(10);
        const auto f = features_for(scene, 30, 2e-4, 10);
        Rng rng(20);
        for (int i = 0; i < 20; ++i) {
            const NavState s = perturbed(scene.truth(), rng, 10.0, deg(2.0));
            const auto lin = linearize_all(s, f, scene.dtm).features;
            const Eigen::MatrixXd Ja = analytic_jacobian(s, lin);
            const Eigen::MatrixXd Jn = numeric_jacobian(s, lin);
            for (int j = 0; j < kStateDim; ++j) CHECK((Ja.col(j) - Jn.col(j)).norm() <= 1e-5 * Jn.col(j).norm());
        }
    }

    TEST_CASE("ground truth is a fixed point") {
        const DtmGrid plane = planar_grid(950, 1150, 1.0, 0.1, 0.08, 10.0);
        LabScene scene = lab_scene();
        scene.dtm = plane;
        const NavState truth = scene.truth();
        const auto f = features_for(scene, 30, 0.0, 1);
        const SolveResult res = solve(f, plane, truth);
        CHECK(res.report.converged);
        CHECK(res.report.iterations <= 1);
        CHECK(state_distance(res.state, truth) < 1e-10);
        // a plane leaves in-plane translation and rotation about its normal free
        CHECK(res.report.rank_deficient);
        CHECK(res.report.rank == 9);
    }

    TEST_CASE("recovers truth from a 10 mm / 2 degree guess") {
        const LabScene scene = lab_scene(2);
        const NavState truth = scene.truth();
        const auto f = pick(features_for(scene, 60, 0.0, 2), 50);
        Rng rng(21);
        for (int trial = 0; trial < 3; ++trial) {
            const NavState init = perturbed(truth, rng, 10.0, deg(2.0));
            const SolveResult res = solve(f, scene.dtm, init);
            CHECK(res.report.converged);
            CHECK(res.report.iterations <= 25);
            CHECK(position_error(res.state, truth) < 0.01);
            CHECK(angle_error(res.state, truth) < deg(0.001));
            CHECK((res.state.ego.p12 - truth.ego.p12).norm() < 0.01);
        }
    }

    TEST_CASE("six features are the minimum") {
        const LabScene scene = lab_scene(3);
        const NavState truth = scene.truth();
        const auto all = features_for(scene, 40, 0.0, 3);
        Rng rng(22);
        const NavState init = perturbed(truth, rng, 1.0, deg(0.2));

        const auto five = pick(all, 5);
        CHECK(failure_of(five, scene.dtm, init) == ErrorCode::RankDeficient);

        const auto six = pick(all, 6);
        const SolveResult res = solve(six, scene.dtm, init);
        CHECK(res.report.converged);
        CHECK(res.report.rank == 12);
        CHECK(res.report.final_rms < 1e-8);
        CHECK(position_error(res.state, truth) < 1e-4);
    }

    TEST_CASE("too few features after rejection") {
        const LabScene scene = lab_scene(3);
        const NavState truth = scene.truth();
        const auto f = pick(features_for(scene, 40, 0.0, 3), 12);
        SolverConfig cfg;
        cfg.min_features = 20;
        CHECK(failure_of(f, scene.dtm, truth, cfg) == ErrorCode::TooFewFeatures);

        NavState sky = truth;
        sky.pose1.p.z() = -1000.0;
        CHECK(failure_of(f, scene.dtm, sky) == ErrorCode::TooFewFeatures);
    }

    TEST_CASE("accepted steps decrease the cost") {
        const LabScene scene = lab_scene(4);
        const NavState truth = scene.truth();
        const auto f = features_for(scene, 100, 2e-4, 4);
        Rng rng(23);
        for (double k : {0.0, 0.05}) {
            SolverConfig cfg;
            cfg.huber_k = k;
            const SolveResult res = solve(f, scene.dtm, perturbed(truth, rng, 10.0, deg(2.0)), cfg);
            REQUIRE(!res.report.accepted_steps.empty());
            for (const auto& [before, after] : res.report.accepted_steps) CHECK(after < before);
        }
    }

    TEST_CASE("outliers: huber loss keeps the estimate") {
        // noise-free inliers, so the threshold sits far below the 5 degree misfit
        SolverConfig robust;
        robust.huber_k = 0.001;
        for (std::uint64_t seed = 5; seed <= 8; ++seed) {
            const LabScene scene = lab_scene(seed);
            const NavState truth = scene.truth();
            auto f = features_for(scene, 100, 0.0, seed);
            Rng rng(24);
            for (std::size_t i = 0; i < f.size(); i += 10) {
                const Vec3 axis = f[i].ray2.direction.cross(rng.unit_vector()).normalized();
                f[i].ray2.direction = rotation_from_axis_angle(axis, deg(5.0)) * f[i].ray2.direction;
            }
            const SolveResult plain = solve(f, scene.dtm, truth);
            const SolveResult huber = solve(f, scene.dtm, truth, robust);
            MESSAGE("seed " << seed << ": plain error " << position_error(plain.state, truth) << " mm, robust error "
                            << position_error(huber.state, truth) << " mm");
            CHECK(position_error(plain.state, truth) > 1.0);
            CHECK(position_error(huber.state, truth) < 0.1);
        }
    }

    TEST_CASE("conditioning tracks the visible geometry") {
        const LabScene scene = lab_scene(6);
        const NavState truth = scene.truth();
        const auto wide = features_for(scene, 100, 0.0, 6);
        const auto lin = linearize_all(truth, wide, scene.dtm);
        const Conditioning good = conditioning_report(numeric_jacobian(truth, lin.features));
        CHECK(good.rank == 12);
        CHECK(good.condition < 1e8);

        // one narrow camera looking straight down at a plane
        const DtmGrid plane = planar_grid(950, 1150, 1.0, 0.0, 0.0, 0.0);
        const CameraModel narrow = CentralPinhole{deg(20)};
        Pose p1{rotation_from_axis_angle(Vec3::UnitX(), kPi), Vec3(475, 560, 300)};
        Pose p2{p1.R, p1.p + Vec3(0, 20, 0)};
        const auto f = synth_correspondences(plane, narrow, p1, p2, 100, 0.0, 6).features;
        const NavState s{p1, relative_motion(p1, p2)};
        const Conditioning bad = conditioning_report(numeric_jacobian(s, linearize_all(s, f, plane).features));
        CHECK((bad.condition > 1e8 || bad.rank < 12));
    }

    TEST_CASE("estimate is equivariant under a world transform") {
        const LabScene scene = lab_scene(7);
        const NavState truth = scene.truth();
        const auto f = features_for(scene, 100, 2e-4, 7);
        Rng rng(25);
        const NavState init = perturbed(truth, rng, 5.0, deg(1.0));
        const SolveResult a = solve(f, scene.dtm, init);
        REQUIRE(a.report.converged);

        const double dz = 37.25;
        const DtmGrid moved = rotated_quarter(scene.dtm, dz);
        const Pose T{rotation_from_axis_angle(Vec3::UnitZ(), kPi / 2.0), Vec3(scene.dtm.nrows(), 0.0, dz)};
        auto transform = [&](const Pose& p) { return Pose{T.R * p.R, apply_pose(T, p.p)}; };
        // the moved grid reproduces the original heights
        CHECK(height_at(moved, 1150.0 - 300.25, 400.5) == doctest::Approx(height_at(scene.dtm, 400.5, 300.25) + dz));

        const SolveResult b = solve(f, moved, {transform(init.pose1), init.ego});
        const Pose expected = transform(a.state.pose1);
        CHECK((b.state.pose1.p - expected.p).norm() < 1e-8);
        CHECK(rotation_distance(b.state.pose1.R, expected.R) < 1e-8);
        CHECK((b.state.ego.p12 - a.state.ego.p12).norm() < 1e-8);
    }

    TEST_CASE("solves are deterministic") {
        const LabScene scene = lab_scene(8);
        const auto f = features_for(scene, 100, 2e-4, 8);
        Rng rng(26);
        const NavState init = perturbed(scene.truth(), rng, 5.0, deg(1.0));
        const SolveResult a = solve(f, scene.dtm, init);
        const SolveResult b = solve(f, scene.dtm, init);
        CHECK(bitwise_equal(a.state, b.state));
        CHECK(a.report.cost_history == b.report.cost_history);
        CHECK(a.report.iterations == b.report.iterations);
    }

    TEST_CASE("position error scales linearly with direction noise") {
        const LabScene scene = lab_scene(9);
        const NavState truth = scene.truth();
        std::vector<double> rms;
        for (double sigma : {1e-4, 2e-4, 4e-4}) {
            double sum = 0.0;
            for (std::uint64_t seed = 1; seed <= 20; ++seed) {
                const auto f = features_for(scene, 100, sigma, seed);
                const SolveResult res = solve(f, scene.dtm, truth);
                sum += std::pow(position_error(res.state, truth), 2);
            }
            rms.push_back(std::sqrt(sum / 20.0));
        }
        MESSAGE("rms position error " << rms[0] << " " << rms[1] << " " << rms[2]);
        for (int i = 0; i < 2; ++i) {
            CHECK(rms[i + 1] / rms[i] >= 1.5);
            CHECK(rms[i + 1] / rms[i] <= 2.7);
        }
    }
}
