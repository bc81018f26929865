#include <cmath>

#include "dtmnav/format.hpp"
#include "dtmnav/solver.hpp"

namespace dtmnav {

namespace {

constexpr std::string_view kCorrespondenceHeader = "s1x,s1y,s1z,q1x,q1y,q1z,s2x,s2y,s2z,q2x,q2y,q2z";

[[noreturn]] void bad_line(std::size_t line, const std::string& what) {
    throw NavError(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

std::string vec_text(const Vec3& v) {
    return format_double(v.x()) + " " + format_double(v.y()) + " " + format_double(v.z());
}

std::string quat_text(const Rotation& R) {
    const Eigen::Quaterniond q = R.quaternion();
    return format_double(q.w()) + " " + format_double(q.x()) + " " + format_double(q.y()) + " " +
           format_double(q.z());
}

Vec3 vec_of(const KeyValueFile& kv, const std::string& key) {
    const auto v = kv.numbers(key);
    if (v.size() != 3) throw NavError(ErrorCode::ParseError, key + ": expected 3 numbers");
    return {v[0], v[1], v[2]};
}

Rotation rot_of(const KeyValueFile& kv, const std::string& key) {
    const auto v = kv.numbers(key);
    if (v.size() != 4) throw NavError(ErrorCode::ParseError, key + ": expected 4 numbers");
    return Rotation::from_quaternion(Eigen::Quaterniond(v[0], v[1], v[2], v[3]));
}

std::string flag(bool b) { return b ? "true" : "false"; }

bool bool_of(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw NavError(ErrorCode::ParseError, key + ": expected true or false");
}

}  // namespace

std::string format_correspondences(std::span<const FeatureCorrespondence> features) {
    std::string out(kCorrespondenceHeader);
    out += '\n';
    for (const FeatureCorrespondence& f : features) {
        const Vec3* parts[] = {&f.ray1.source, &f.ray1.direction, &f.ray2.source, &f.ray2.direction};
        for (std::size_t i = 0; i < 4; ++i) {
            for (int k = 0; k < 3; ++k) {
                if (i || k) out += ',';
                append_double(out, (*parts[i])[k]);
            }
        }
        out += '\n';
    }
    return out;
}

std::vector<FeatureCorrespondence> parse_correspondences(const std::string& text) {
    std::vector<FeatureCorrespondence> out;
    std::size_t line_no = 0;
    for (std::string_view line : split(text, '\n')) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        if (line == kCorrespondenceHeader) continue;
        const auto fields = split(line, ',');
        if (fields.size() != 12) bad_line(line_no, "expected 12 fields, found " + std::to_string(fields.size()));
        double v[12];
        for (std::size_t i = 0; i < 12; ++i) {
            const auto d = parse_double(fields[i]);
            if (!d || !std::isfinite(*d)) bad_line(line_no, "invalid number '" + std::string(trim(fields[i])) + "'");
            v[i] = *d;
        }
        FeatureCorrespondence f;
        f.ray1.source = Vec3(v[0], v[1], v[2]);
        f.ray1.direction = Vec3(v[3], v[4], v[5]);
        f.ray2.source = Vec3(v[6], v[7], v[8]);
        f.ray2.direction = Vec3(v[9], v[10], v[11]);
        for (Vec3* d : {&f.ray1.direction, &f.ray2.direction}) {
            const double n = d->norm();
            if (!(n > 0.0)) bad_line(line_no, "zero direction");
            *d /= n;
        }
        out.push_back(f);
    }
    return out;
}

std::string format_state(const NavState& state) {
    const Pose pose2 = second_pose(state.pose1, state.ego);
    KeyValueFile kv;
    kv.set("pose1.position", vec_text(state.pose1.p));
    kv.set("pose1.quaternion", quat_text(state.pose1.R));
    kv.set("pose2.position", vec_text(pose2.p));
    kv.set("pose2.quaternion", quat_text(pose2.R));
    kv.set("ego.quaternion", quat_text(state.ego.R12));
    kv.set("ego.translation", vec_text(state.ego.p12));
    return kv.str();
}

NavState parse_state(const std::string& text) {
    const KeyValueFile kv = KeyValueFile::parse(text);
    NavState s;
    s.pose1 = {rot_of(kv, "pose1.quaternion"), vec_of(kv, "pose1.position")};
    if (kv.has("ego.quaternion") || kv.has("ego.translation")) {
        s.ego = {rot_of(kv, "ego.quaternion"), vec_of(kv, "ego.translation")};
    } else {
        s.ego = relative_motion(s.pose1, {rot_of(kv, "pose2.quaternion"), vec_of(kv, "pose2.position")});
    }
    return s;
}

std::string format_report(const SolverReport& r, const std::string& status) {
    KeyValueFile kv;
    kv.set("status", status);
    kv.set("converged", flag(r.converged));
    kv.set("termination", r.termination.empty() ? "none" : r.termination);
    kv.set("iterations", std::to_string(r.iterations));
    kv.set("final_rms", format_double(r.final_rms));
    kv.set("final_cost", format_double(r.final_cost));
    kv.set("condition", format_double(r.condition));
    std::string sv;
    for (int i = 0; i < kStateDim; ++i) sv += (i ? " " : "") + format_double(r.singular_values[i]);
    kv.set("singular_values", sv);
    kv.set("rank", std::to_string(r.rank));
    kv.set("rank_deficient", flag(r.rank_deficient));
    kv.set("ill_conditioned", flag(r.ill_conditioned));
    kv.set("used_features", std::to_string(r.used_features));
    kv.set("rejected_features", std::to_string(r.rejected.size()));
    std::string reasons;
    for (const Rejection& j : r.rejected) {
        reasons += (reasons.empty() ? "" : " ") + std::to_string(j.feature) + ":" + std::string(to_string(j.reason));
    }
    kv.set("rejected", reasons.empty() ? "none" : reasons);
    std::string rms;
    for (double v : r.rms_history) rms += (rms.empty() ? "" : " ") + format_double(v);
    kv.set("rms_history", rms);
    return kv.str();
}

void apply_solver_config(SolverConfig& cfg, const KeyValueFile& kv) {
    for (const auto& [key, value] : kv.values()) {
        if (key.rfind("solver.", 0) != 0) continue;
        const std::string name = key.substr(7);
        if (name == "relinearize") {
            cfg.relinearize = bool_of(key, value);
        } else if (name == "jacobian") {
            if (value == "analytic") {
                cfg.jacobian = JacobianMode::Analytic;
            } else if (value == "numeric") {
                cfg.jacobian = JacobianMode::Numeric;
            } else {
                throw NavError(ErrorCode::ParseError, key + ": expected analytic or numeric");
            }
        } else {
            const double v = kv.number(key);
            if (name == "max_iterations") cfg.max_iterations = static_cast<int>(v);
            else if (name == "step_tolerance") cfg.step_tolerance = v;
            else if (name == "residual_tolerance") cfg.residual_tolerance = v;
            else if (name == "initial_damping") cfg.initial_damping = v;
            else if (name == "damping_growth") cfg.damping_growth = v;
            else if (name == "damping_shrink") cfg.damping_shrink = v;
            else if (name == "huber_k") cfg.huber_k = v;
            else if (name == "min_features") cfg.min_features = static_cast<std::size_t>(v);
            else if (name == "condition_warn") cfg.condition_warn = v;
            else if (name == "rank_tolerance") cfg.rank_tolerance = v;
            else if (name == "max_escalations") cfg.max_escalations = static_cast<int>(v);
            else throw NavError(ErrorCode::ParseError, "unknown key '" + key + "'");
        }
    }
    validate(cfg);
}

std::string format_solver_config(const SolverConfig& cfg) {
    KeyValueFile kv;
    kv.set("solver.max_iterations", std::to_string(cfg.max_iterations));
    kv.set("solver.step_tolerance", format_double(cfg.step_tolerance));
    kv.set("solver.residual_tolerance", format_double(cfg.residual_tolerance));
    kv.set("solver.initial_damping", format_double(cfg.initial_damping));
    kv.set("solver.damping_growth", format_double(cfg.damping_growth));
    kv.set("solver.damping_shrink", format_double(cfg.damping_shrink));
    kv.set("solver.huber_k", format_double(cfg.huber_k));
    kv.set("solver.relinearize", flag(cfg.relinearize));
    kv.set("solver.jacobian", cfg.jacobian == JacobianMode::Analytic ? "analytic" : "numeric");
    kv.set("solver.min_features", std::to_string(cfg.min_features));
    kv.set("solver.condition_warn", format_double(cfg.condition_warn));
    kv.set("solver.rank_tolerance", format_double(cfg.rank_tolerance));
    kv.set("solver.max_escalations", std::to_string(cfg.max_escalations));
    return kv.str();
}

}  // namespace dtmnav
