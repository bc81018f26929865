#include "dtmnav/simulation.hpp"

#include <algorithm>
#include <cmath>

namespace dtmnav {

namespace {

constexpr int kSplineTableSteps = 256;

void validate(const TrajectorySpec& s) {
    const bool finite = std::isfinite(s.speed) && std::isfinite(s.duration) && std::isfinite(s.sample_rate) &&
                        std::isfinite(s.arc_rate) && std::isfinite(s.turn_rate) && std::isfinite(s.clearance) &&
                        s.direction.allFinite() && s.start.p.allFinite();
    if (!finite) throw NavError(ErrorCode::InvalidArgument, "trajectory spec has non-finite fields");
    if (s.speed < 0 || s.duration < 0 || s.sample_rate <= 0) {
        throw NavError(ErrorCode::InvalidArgument, "trajectory needs speed >= 0, duration >= 0, sample rate > 0");
    }
    if (s.clearance <= 0) throw NavError(ErrorCode::InvalidArgument, "trajectory clearance must be positive");
    if (s.kind != TrajectoryKind::WaypointSpline && s.direction.norm() == 0.0) {
        throw NavError(ErrorCode::InvalidArgument, "trajectory direction is zero");
    }
    if (s.kind == TrajectoryKind::WaypointSpline && s.waypoints.empty()) {
        throw NavError(ErrorCode::InvalidArgument, "spline trajectory needs at least one waypoint");
    }
}

Vec3 catmull_rom(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3, double u) {
    const double u2 = u * u;
    const double u3 = u2 * u;
    return 0.5 * ((2.0 * p1) + (-p0 + p2) * u + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u2 +
                  (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * u3);
}

}  // namespace

TrajectoryModel::TrajectoryModel(TrajectorySpec spec) : spec_(std::move(spec)) {
    validate(spec_);
    if (spec_.kind != TrajectoryKind::WaypointSpline) {
        spec_.direction.normalize();
        return;
    }
    std::vector<Vec3> pts{spec_.start.p};
    pts.insert(pts.end(), spec_.waypoints.begin(), spec_.waypoints.end());
    const std::size_t segments = pts.size() - 1;
    auto at = [&](std::ptrdiff_t i) {
        return pts[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(segments)))];
    };
    knots_.push_back(pts.front());
    cumulative_.push_back(0.0);
    for (std::size_t s = 0; s < segments; ++s) {
        const auto i = static_cast<std::ptrdiff_t>(s);
        for (int k = 1; k <= kSplineTableSteps; ++k) {
            const Vec3 p = catmull_rom(at(i - 1), at(i), at(i + 1), at(i + 2), static_cast<double>(k) / kSplineTableSteps);
            cumulative_.push_back(cumulative_.back() + (p - knots_.back()).norm());
            knots_.push_back(p);
        }
    }
}

Vec3 TrajectoryModel::position_at(double t) const {
    const TrajectorySpec& s = spec_;
    const double dist = s.speed * t;
    switch (s.kind) {
    case TrajectoryKind::Line:
        return s.start.p + dist * s.direction;
    case TrajectoryKind::Arc: {
        const double w = s.arc_rate;
        if (std::abs(w * t) < 1e-12) return s.start.p + dist * s.direction;
        // horizontal heading turns about z; the climb component stays constant
        const Vec3 h(s.direction.x(), s.direction.y(), 0.0);
        const Vec3 h_perp(-s.direction.y(), s.direction.x(), 0.0);
        const Vec3 horiz = (std::sin(w * t) * h + (1.0 - std::cos(w * t)) * h_perp) / w;
        return s.start.p + s.speed * horiz + Vec3(0.0, 0.0, dist * s.direction.z());
    }
    case TrajectoryKind::WaypointSpline: {
        if (dist <= 0.0) return knots_.front();
        if (dist >= cumulative_.back()) return knots_.back();
        const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), dist);
        const auto hi = static_cast<std::size_t>(it - cumulative_.begin());
        const std::size_t lo = hi - 1;
        const double span = cumulative_[hi] - cumulative_[lo];
        const double f = span > 0.0 ? (dist - cumulative_[lo]) / span : 0.0;
        return knots_[lo] + f * (knots_[hi] - knots_[lo]);
    }
    }
    return s.start.p;
}

Pose TrajectoryModel::pose_at(double t) const {
    Pose out;
    out.p = position_at(t);
    out.R = spec_.start.R;
    if (spec_.orientation == OrientationProgram::Turning) {
        out.R = rotation_from_axis_angle(Vec3::UnitZ(), spec_.turn_rate * t) * spec_.start.R;
    }
    return out;
}

std::vector<double> TrajectoryModel::sample_times() const {
    const auto count = static_cast<std::size_t>(std::floor(spec_.duration * spec_.sample_rate + 1e-9));
    std::vector<double> times(count + 1);
    for (std::size_t k = 0; k <= count; ++k) times[k] = static_cast<double>(k) / spec_.sample_rate;
    return times;
}

Trajectory gen_trajectory(const TrajectorySpec& spec, const DtmGrid& dtm) {
    const TrajectoryModel model(spec);
    Trajectory out;
    for (double t : model.sample_times()) {
        const Pose pose = model.pose_at(t);
        if (dtm.contains(pose.p.x(), pose.p.y())) {
            double ground = 0.0;
            bool known = true;
            try {
                ground = height_at(dtm, pose.p.x(), pose.p.y());
            } catch (const NavError&) {
                known = false;  // nodata below: nothing to collide with
            }
            if (known && pose.p.z() - ground < spec.clearance) {
                throw NavError(ErrorCode::TerrainCollision,
                               "trajectory passes within clearance of the terrain at t = " + std::to_string(t));
            }
        }
        out.push_back({t, pose});
    }
    return out;
}

}  // namespace dtmnav
