#include "dtmnav/format.hpp"
#include "dtmnav/simulation.hpp"

namespace dtmnav {

namespace {

constexpr std::string_view kTrajectoryHeader = "t_sec,px,py,pz,qw,qx,qy,qz";
constexpr std::string_view kErrorHeader = "t_sec,pos_err,ang_err_deg,variant";

[[noreturn]] void bad_line(std::size_t line, const std::string& what) {
    throw NavError(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

double field(std::string_view s, std::size_t line) {
    const auto v = parse_double(trim(s));
    if (!v) bad_line(line, "invalid number '" + std::string(trim(s)) + "'");
    return *v;
}

/// Calls fn(line_number, fields) for each non-empty line after the header.
template <typename Fn>
void for_each_row(const std::string& text, std::string_view header, std::size_t columns, Fn fn) {
    std::size_t line_no = 0;
    bool seen_header = false;
    for (std::string_view line : split(text, '\n')) {
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        if (!seen_header) {
            if (line != header) bad_line(line_no, "expected header '" + std::string(header) + "'");
            seen_header = true;
            continue;
        }
        const auto fields = split(line, ',');
        if (fields.size() != columns) {
            bad_line(line_no, "expected " + std::to_string(columns) + " fields, found " + std::to_string(fields.size()));
        }
        fn(line_no, fields);
    }
    if (!seen_header) throw NavError(ErrorCode::ParseError, "missing header '" + std::string(header) + "'");
}

}  // namespace

std::string format_trajectory_csv(const Trajectory& traj) {
    std::string out(kTrajectoryHeader);
    out += '\n';
    for (const TimedPose& s : traj) {
        const Eigen::Quaterniond q = s.pose.R.quaternion();
        const double values[] = {s.t, s.pose.p.x(), s.pose.p.y(), s.pose.p.z(), q.w(), q.x(), q.y(), q.z()};
        for (std::size_t i = 0; i < std::size(values); ++i) {
            if (i) out += ',';
            append_double(out, values[i]);
        }
        out += '\n';
    }
    return out;
}

Trajectory parse_trajectory_csv(const std::string& text) {
    Trajectory out;
    for_each_row(text, kTrajectoryHeader, 8, [&](std::size_t line, const std::vector<std::string_view>& f) {
        double v[8];
        for (std::size_t i = 0; i < 8; ++i) v[i] = field(f[i], line);
        TimedPose s;
        s.t = v[0];
        s.pose.p = Vec3(v[1], v[2], v[3]);
        try {
            s.pose.R = Rotation::from_quaternion(Eigen::Quaterniond(v[4], v[5], v[6], v[7]));
        } catch (const NavError& e) {
            bad_line(line, e.what());
        }
        out.push_back(s);
    });
    return out;
}

Trajectory load_trajectory(const std::filesystem::path& path) { return parse_trajectory_csv(read_text_file(path)); }

void save_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
    write_text_file(path, format_trajectory_csv(traj));
}

std::string format_error_csv(const std::vector<ErrorCurve>& curves) {
    std::string out(kErrorHeader);
    out += '\n';
    for (const ErrorCurve& c : curves) {
        for (const ErrorSample& s : c.samples) {
            append_double(out, s.t);
            out += ',';
            append_double(out, s.position);
            out += ',';
            append_double(out, s.angle_deg);
            out += ',';
            out += c.variant;
            out += '\n';
        }
    }
    return out;
}

std::vector<ErrorCurve> parse_error_csv(const std::string& text) {
    std::vector<ErrorCurve> curves;
    for_each_row(text, kErrorHeader, 4, [&](std::size_t line, const std::vector<std::string_view>& f) {
        const std::string variant(trim(f[3]));
        auto it = std::find_if(curves.begin(), curves.end(), [&](const ErrorCurve& c) { return c.variant == variant; });
        if (it == curves.end()) {
            curves.push_back({variant, {}});
            it = std::prev(curves.end());
        }
        it->samples.push_back({field(f[0], line), field(f[1], line), field(f[2], line)});
    });
    return curves;
}

}  // namespace dtmnav
