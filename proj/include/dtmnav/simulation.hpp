#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dtmnav/constraint.hpp"
#include "dtmnav/random.hpp"
#include "dtmnav/sensors.hpp"
#include "dtmnav/solver.hpp"
#include "dtmnav/terrain.hpp"

namespace dtmnav {

// ---------------------------------------------------------------------------
// Trajectories

enum class TrajectoryKind { Line, Arc, WaypointSpline };
enum class OrientationProgram { Fixed, Turning };

struct TrajectorySpec {
    TrajectoryKind kind = TrajectoryKind::Line;
    Pose start;
    /// World direction of travel at t = 0 (Line, Arc). Normalized on use.
    Vec3 direction = Vec3::UnitX();
    double speed = 20.0 / 3.0;
    double duration = 60.0;
    double sample_rate = 10.0;
    /// Heading rate of an Arc about world z, rad/s.
    double arc_rate = 0.0;
    OrientationProgram orientation = OrientationProgram::Fixed;
    /// Yaw rate about world z applied to the start attitude, rad/s.
    double turn_rate = 0.0;
    /// Catmull-Rom control points after start.p (WaypointSpline).
    std::vector<Vec3> waypoints;
    /// Minimum height above the DTM at every sample.
    double clearance = 5.0;
};

struct TimedPose {
    double t = 0.0;
    Pose pose;
};
using Trajectory = std::vector<TimedPose>;

/// Continuous evaluation of a trajectory spec.
class TrajectoryModel {
public:
    explicit TrajectoryModel(TrajectorySpec spec);
    Pose pose_at(double t) const;
    const TrajectorySpec& spec() const { return spec_; }
    /// Sample times k / sample_rate for k = 0 .. floor(duration * rate).
    std::vector<double> sample_times() const;

private:
    Vec3 position_at(double t) const;

    TrajectorySpec spec_;
    // arc-length table for splines: cumulative length at each table knot
    std::vector<Vec3> knots_;
    std::vector<double> cumulative_;
};

/// Samples the spec. Throws TerrainCollision when a sample over the grid
/// sits lower than the clearance above the surface; InvalidArgument for a
/// malformed spec.
Trajectory gen_trajectory(const TrajectorySpec& spec, const DtmGrid& dtm);

// ---------------------------------------------------------------------------
// Drift

struct DriftModel {
    double position_rate = 1.0;        // length / s
    double orientation_rate_deg = 0.7;  // deg / s
    std::uint64_t seed = 0;
    /// Piecewise-constant random directions instead of one fixed direction.
    bool random_walk = false;
    double walk_interval = 1.0;  // s
};

/// Dead-reckoning error of an estimate relative to the truth:
/// estimate = (dR * R_true, p_true + dp).
struct PoseError {
    Vec3 dp = Vec3::Zero();
    Rotation dR;

    Pose apply(const Pose& truth) const { return {dR * truth.R, truth.p + dp}; }
    static PoseError between(const Pose& truth, const Pose& estimate);
};

/// Error accumulated by the drift model over time intervals.
class DriftProcess {
public:
    explicit DriftProcess(DriftModel model);
    /// Error accrued over [a, b] starting from `start`.
    PoseError advance(const PoseError& start, double a, double b) const;
    const DriftModel& model() const { return model_; }
    const Vec3& position_direction() const { return pos_dir_; }
    const Vec3& rotation_axis() const { return rot_axis_; }

private:
    Vec3 walk_direction(std::int64_t step, std::uint64_t stream) const;

    DriftModel model_;
    Vec3 pos_dir_;
    Vec3 rot_axis_;
};

/// Trajectory corrupted by the drift model from t = 0 with no corrections.
Trajectory apply_drift(const Trajectory& truth, const DriftModel& model);

// ---------------------------------------------------------------------------
// Correspondence synthesis

struct SynthOptions {
    /// Cameras to sample (empty: all cameras of the model).
    std::vector<std::size_t> cameras;
    /// Reject features whose ground point is hidden from the second pose.
    bool occlusion_check = true;
};

struct SynthResult {
    std::vector<FeatureCorrespondence> features;
    std::vector<Vec3> ground_points;
    std::vector<std::size_t> camera;
    std::size_t requested = 0;
    /// Fewer features survived than were requested.
    bool insufficient = false;
};

/// Rotates unit vector q by an angle ~ N(0, sigma) about a random axis
/// perpendicular to it.
Vec3 perturb_direction(const Vec3& q, double sigma, Rng& rng);

/// n features per sampled camera on a regular image grid: raycast from pose1,
/// project into pose2, drop invisible ones, add direction noise.
SynthResult synth_correspondences(const DtmGrid& dtm, const CameraModel& model, const Pose& pose1, const Pose& pose2,
                                  std::size_t n, double sigma, std::uint64_t seed, const SynthOptions& options = {});

// ---------------------------------------------------------------------------
// Missions

struct MissionConfig {
    std::string dtm_path;  // informational; run_mission takes the grid itself
    TrajectorySpec trajectory;
    CameraModel camera = make_ring_rig();
    /// Cameras used for correction (empty: all).
    std::vector<std::size_t> active_cameras;
    double correction_rate = 1.0;
    double baseline = 20.0;
    /// Per camera of the full model; the total is split over active cameras.
    std::size_t features_per_camera = 100;
    double direction_noise = 0.0;
    double dtm_height_noise = 0.0;
    DriftModel drift;
    SolverConfig solver;
    /// Set solver.huber_k to 3x the expected residual scale when noise > 0.
    bool auto_huber = true;
    /// Keep each correction's correspondences in its record.
    bool keep_correspondences = false;
    std::uint64_t seed = 0;
};

void validate(const MissionConfig& cfg);

struct ErrorSample {
    double t = 0.0;
    double position = 0.0;
    double angle_deg = 0.0;
};

struct ErrorCurve {
    std::string variant;
    std::vector<ErrorSample> samples;
};

struct CorrectionRecord {
    double t = 0.0;
    double t_previous = 0.0;
    bool ok = false;
    std::string failure;
    std::optional<ErrorCode> failure_code;
    std::size_t synthesized = 0;
    NavState truth;
    NavState initial;
    /// Huber threshold the solver ran with.
    double huber_k = 0.0;
    /// Filled when MissionConfig::keep_correspondences is set.
    std::vector<FeatureCorrespondence> features;
    SolverReport report;
    double position_error_before = 0.0;
    double position_error_after = 0.0;
    double angle_error_before_deg = 0.0;
    double angle_error_after_deg = 0.0;
};

struct MissionResult {
    Trajectory truth;
    Trajectory drifted;
    Trajectory corrected;
    ErrorCurve drifted_errors;
    ErrorCurve corrected_errors;
    std::vector<CorrectionRecord> corrections;
};

MissionResult run_mission(const MissionConfig& cfg, const DtmGrid& dtm);

struct MissionSummary {
    std::size_t corrections = 0;
    std::size_t solved = 0;
    /// Corrections that lowered the position error.
    std::size_t improved = 0;
    double mean_error_after = 0.0;
    double max_corrected_error = 0.0;
    double final_drifted_error = 0.0;
    double final_corrected_error = 0.0;
};

MissionSummary summarize(const MissionResult& result);

/// Position norm and geodesic angle per sample. Throws TimestampMismatch.
ErrorCurve error_metrics(const Trajectory& truth, const Trajectory& estimate, const std::string& variant = "");

// ---------------------------------------------------------------------------
// Reference scenarios

struct Scenario {
    DtmGrid dtm;
    MissionConfig mission;
};

/// Lab-model replica: 950 x 1150 grid at 1 length unit, 320 relief, the
/// three-camera ring rig flying a straight line.
Scenario reference_scenario(std::uint64_t seed);

/// Terrain with a steep planar mountainside that the trajectory approaches
/// head-on, so camera 0 ends up seeing only the planar face.
Scenario mountainside_scenario(std::uint64_t seed);

/// Mountainside terrain only.
DtmGrid generate_mountainside_terrain(std::uint64_t seed, int ncols = 600, int nrows = 600, double cellsize = 1.0);

// ---------------------------------------------------------------------------
// Text formats

/// `t_sec,px,py,pz,qw,qx,qy,qz` with a header line.
std::string format_trajectory_csv(const Trajectory& traj);
Trajectory parse_trajectory_csv(const std::string& text);
Trajectory load_trajectory(const std::filesystem::path& path);
void save_trajectory(const Trajectory& traj, const std::filesystem::path& path);

/// `t_sec,pos_err,ang_err_deg,variant`; curves are written one after another.
std::string format_error_csv(const std::vector<ErrorCurve>& curves);
std::vector<ErrorCurve> parse_error_csv(const std::string& text);

}  // namespace dtmnav
