#include <algorithm>
#include <cmath>
#include <numbers>

#include "dtmnav/random.hpp"
#include "dtmnav/simulation.hpp"

namespace dtmnav {

namespace {

constexpr std::uint64_t kHeightNoiseStream = 0x64746d;  // "dtm"
constexpr std::uint64_t kCorrectionStream = 0x636f72;   // "cor"
constexpr double kTimeEps = 1e-9;

double degrees(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Estimate error as a function of time: drift accrues from the most recent
/// correction anchor.
class ErrorHistory {
public:
    explicit ErrorHistory(const DriftProcess& drift, double t0) : drift_(drift) { anchors_.push_back({t0, {}}); }

    /// Error at t, counting a correction made exactly at t.
    PoseError at(double t) const {
        auto it = std::find_if(anchors_.rbegin(), anchors_.rend(), [&](const Anchor& a) { return a.t <= t + kTimeEps; });
        if (it == anchors_.rend()) it = std::prev(anchors_.rend());
        return drift_.advance(it->error, it->t, t);
    }

    void reset(double t, const PoseError& e) { anchors_.push_back({t, e}); }

private:
    struct Anchor {
        double t;
        PoseError error;
    };
    const DriftProcess& drift_;
    std::vector<Anchor> anchors_;
};

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

}  // namespace

void validate(const MissionConfig& cfg) {
    if (!(cfg.baseline > 0.0)) throw NavError(ErrorCode::InvalidArgument, "baseline must be positive");
    if (!(cfg.correction_rate > 0.0)) throw NavError(ErrorCode::InvalidArgument, "correction rate must be positive");
    if (cfg.features_per_camera == 0) throw NavError(ErrorCode::InvalidArgument, "features per camera must be positive");
    if (!(cfg.direction_noise >= 0.0) || !(cfg.dtm_height_noise >= 0.0)) {
        throw NavError(ErrorCode::InvalidArgument, "noise levels must be non-negative");
    }
    validate(cfg.camera);
    validate(cfg.solver);
    for (std::size_t c : cfg.active_cameras) {
        if (c >= camera_count(cfg.camera)) {
            throw NavError(ErrorCode::UnknownCameraIndex, "active camera " + std::to_string(c) + " does not exist");
        }
    }
}

ErrorCurve error_metrics(const Trajectory& truth, const Trajectory& estimate, const std::string& variant) {
    if (truth.size() != estimate.size()) {
        throw NavError(ErrorCode::TimestampMismatch, "trajectories have " + std::to_string(truth.size()) + " and " +
                                                         std::to_string(estimate.size()) + " samples");
    }
    ErrorCurve curve;
    curve.variant = variant;
    curve.samples.reserve(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const TimedPose& a = truth[i];
        const TimedPose& b = estimate[i];
        if (std::abs(a.t - b.t) > kTimeEps * std::max(1.0, std::abs(a.t))) {
            throw NavError(ErrorCode::TimestampMismatch, "timestamps differ at sample " + std::to_string(i));
        }
        if (i > 0 && !(a.t > truth[i - 1].t)) {
            throw NavError(ErrorCode::TimestampMismatch, "timestamps not strictly increasing at sample " + std::to_string(i));
        }
        curve.samples.push_back({a.t, (b.pose.p - a.pose.p).norm(), degrees(rotation_distance(a.pose.R, b.pose.R))});
    }
    return curve;
}

MissionResult run_mission(const MissionConfig& cfg, const DtmGrid& dtm) {
    validate(cfg);
    const TrajectoryModel model(cfg.trajectory);
    const DriftProcess drift(cfg.drift);

    MissionResult out;
    out.truth = gen_trajectory(cfg.trajectory, dtm);
    out.drifted = apply_drift(out.truth, cfg.drift);

    const DtmGrid noisy = cfg.dtm_height_noise > 0.0
                              ? with_height_noise(dtm, cfg.dtm_height_noise, Rng::mix(cfg.seed, kHeightNoiseStream))
                              : DtmGrid{};
    const DtmGrid& solver_dtm = cfg.dtm_height_noise > 0.0 ? noisy : dtm;

    std::vector<std::size_t> active = cfg.active_cameras;
    if (active.empty()) {
        for (std::size_t c = 0; c < camera_count(cfg.camera); ++c) active.push_back(c);
    }
    const std::size_t total = cfg.features_per_camera * camera_count(cfg.camera);
    const std::size_t per_camera = std::max<std::size_t>(1, total / active.size());

    const double t0 = out.truth.front().t;
    const double t_end = out.truth.back().t;
    ErrorHistory history(drift, t0);

    const double speed = cfg.trajectory.speed;
    if (speed > 0.0) {
        const double baseline_time = cfg.baseline / speed;
        for (std::size_t j = 0;; ++j) {
            const double tc = t0 + baseline_time + static_cast<double>(j) / cfg.correction_rate;
            if (tc > t_end + kTimeEps) break;
            const double t1 = tc - baseline_time;

            CorrectionRecord rec;
            rec.t = tc;
            rec.t_previous = t1;
            const Pose true1 = model.pose_at(t1);
            const Pose true2 = model.pose_at(tc);
            const Pose est1 = history.at(t1).apply(true1);
            const Pose est2 = history.at(tc).apply(true2);
            rec.position_error_before = (est2.p - true2.p).norm();
            rec.angle_error_before_deg = degrees(rotation_distance(est2.R, true2.R));

            const SynthResult synth = synth_correspondences(dtm, cfg.camera, true1, true2, per_camera,
                                                            cfg.direction_noise, Rng::mix(cfg.seed, kCorrectionStream + j),
                                                            SynthOptions{active, true});
            rec.synthesized = synth.features.size();

            SolverConfig scfg = cfg.solver;
            if (cfg.auto_huber && scfg.huber_k == 0.0 && cfg.direction_noise > 0.0) {
                std::vector<double> ranges;
                ranges.reserve(synth.ground_points.size());
                for (const Vec3& g : synth.ground_points) ranges.push_back((g - true2.p).norm());
                // both rays carry noise, so the residual scale is about sqrt(2) sigma * range
                scfg.huber_k = 3.0 * std::sqrt(2.0) * cfg.direction_noise * median(ranges);
            }

            const NavState initial{est1, relative_motion(est1, est2)};
            rec.truth = {true1, relative_motion(true1, true2)};
            rec.initial = initial;
            rec.huber_k = scfg.huber_k;
            if (cfg.keep_correspondences) rec.features = synth.features;
            Pose corrected = est2;
            try {
                const SolveResult res = solve(synth.features, solver_dtm, initial, scfg);
                rec.report = res.report;
                rec.ok = true;
                corrected = second_pose(res.state.pose1, res.state.ego);
                history.reset(tc, PoseError::between(true2, corrected));
            } catch (const EstimationError& e) {
                rec.report = e.report();
                rec.failure = e.what();
                rec.failure_code = e.code();
            } catch (const NavError& e) {
                rec.failure = e.what();
                rec.failure_code = e.code();
            }
            rec.position_error_after = (corrected.p - true2.p).norm();
            rec.angle_error_after_deg = degrees(rotation_distance(corrected.R, true2.R));
            out.corrections.push_back(std::move(rec));
        }
    }

    out.corrected.reserve(out.truth.size());
    for (const TimedPose& s : out.truth) out.corrected.push_back({s.t, history.at(s.t).apply(s.pose)});
    out.drifted_errors = error_metrics(out.truth, out.drifted, "drifted");
    out.corrected_errors = error_metrics(out.truth, out.corrected, "corrected");
    return out;
}

MissionSummary summarize(const MissionResult& result) {
    MissionSummary s;
    s.corrections = result.corrections.size();
    for (const CorrectionRecord& c : result.corrections) {
        s.solved += c.ok;
        s.improved += c.position_error_after < c.position_error_before;
        s.mean_error_after += c.position_error_after;
    }
    if (s.corrections) s.mean_error_after /= static_cast<double>(s.corrections);
    for (const ErrorSample& e : result.corrected_errors.samples) {
        s.max_corrected_error = std::max(s.max_corrected_error, e.position);
    }
    if (!result.drifted_errors.samples.empty()) s.final_drifted_error = result.drifted_errors.samples.back().position;
    if (!result.corrected_errors.samples.empty()) {
        s.final_corrected_error = result.corrected_errors.samples.back().position;
    }
    return s;
}

}  // namespace dtmnav
