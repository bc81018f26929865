#include <cmath>
#include <numbers>

#include "dtmnav/random.hpp"
#include "dtmnav/simulation.hpp"

namespace dtmnav {

namespace {

constexpr std::uint64_t kPositionStream = 0x706f73;  // "pos"
constexpr std::uint64_t kRotationStream = 0x726f74;  // "rot"

}  // namespace

PoseError PoseError::between(const Pose& truth, const Pose& estimate) {
    return {estimate.p - truth.p, estimate.R * truth.R.inverse()};
}

DriftProcess::DriftProcess(DriftModel model) : model_(model) {
    if (!(model_.position_rate >= 0.0) || !(model_.orientation_rate_deg >= 0.0)) {
        throw NavError(ErrorCode::InvalidArgument, "drift rates must be non-negative");
    }
    if (model_.random_walk && !(model_.walk_interval > 0.0)) {
        throw NavError(ErrorCode::InvalidArgument, "random-walk interval must be positive");
    }
    pos_dir_ = Rng(model_.seed, kPositionStream).unit_vector();
    rot_axis_ = Rng(model_.seed, kRotationStream).unit_vector();
}

Vec3 DriftProcess::walk_direction(std::int64_t step, std::uint64_t stream) const {
    return Rng(Rng::mix(model_.seed, stream), static_cast<std::uint64_t>(step)).unit_vector();
}

PoseError DriftProcess::advance(const PoseError& start, double a, double b) const {
    PoseError out = start;
    if (!(b > a)) return out;
    const double rate_p = model_.position_rate;
    const double rate_r = model_.orientation_rate_deg * std::numbers::pi / 180.0;

    if (!model_.random_walk) {
        out.dp += rate_p * (b - a) * pos_dir_;
        out.dR = Rotation::exp(rate_r * (b - a) * rot_axis_) * out.dR;
        return out;
    }
    // piecewise-constant directions over steps [k tau, (k + 1) tau)
    const double tau = model_.walk_interval;
    auto k = static_cast<std::int64_t>(std::floor(a / tau));
    double t = a;
    while (t < b) {
        const double end = std::min(b, static_cast<double>(k + 1) * tau);
        const double dt = end - t;
        if (dt > 0.0) {
            out.dp += rate_p * dt * walk_direction(k, kPositionStream);
            out.dR = Rotation::exp(rate_r * dt * walk_direction(k, kRotationStream)) * out.dR;
        }
        t = end;
        ++k;
    }
    return out;
}

Trajectory apply_drift(const Trajectory& truth, const DriftModel& model) {
    const DriftProcess process(model);
    Trajectory out;
    out.reserve(truth.size());
    const double t0 = truth.empty() ? 0.0 : truth.front().t;
    for (const TimedPose& s : truth) {
        out.push_back({s.t, process.advance(PoseError{}, t0, s.t).apply(s.pose)});
    }
    return out;
}

}  // namespace dtmnav
