#include "dtmnav/terrain.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dtmnav/errors.hpp"
#include "dtmnav/random.hpp"

namespace dtmnav {

DtmGrid::DtmGrid(int ncols, int nrows, double origin_x, double origin_y, double cellsize,
                 std::vector<double> heights, double nodata)
    : ncols_(ncols),
      nrows_(nrows),
      origin_x_(origin_x),
      origin_y_(origin_y),
      cellsize_(cellsize),
      nodata_(nodata),
      heights_(std::move(heights)) {
    if (ncols < 2 || nrows < 2) {
        throw NavError(ErrorCode::InvalidArgument, "grid needs at least 2x2 samples");
    }
    if (!(cellsize > 0.0) || !std::isfinite(cellsize)) {
        throw NavError(ErrorCode::InvalidArgument, "cellsize must be positive");
    }
    if (!std::isfinite(origin_x) || !std::isfinite(origin_y)) {
        throw NavError(ErrorCode::InvalidArgument, "origin must be finite");
    }
    if (heights_.size() != static_cast<std::size_t>(ncols) * static_cast<std::size_t>(nrows)) {
        throw NavError(ErrorCode::InvalidArgument, "height count does not match ncols * nrows");
    }
    for (double h : heights_) {
        if (h != nodata_ && !std::isfinite(h)) {
            throw NavError(ErrorCode::InvalidArgument, "non-finite height sample");
        }
    }
    refresh_range();
}

void DtmGrid::refresh_range() {
    bool any = false;
    for (double h : heights_) {
        if (h == nodata_) continue;
        if (!any) {
            min_h_ = max_h_ = h;
            any = true;
        } else {
            min_h_ = std::min(min_h_, h);
            max_h_ = std::max(max_h_, h);
        }
    }
}

bool DtmGrid::contains(double x, double y) const {
    return x >= min_x() && x <= max_x() && y >= min_y() && y <= max_y();
}

namespace {

/// Bilinear patch between four samples, parameterised by u, v in [0, 1].
struct Patch {
    int col = 0;
    int row = 0;
    double h00 = 0, h10 = 0, h01 = 0, h11 = 0;

    double height(double u, double v) const {
        return h00 * (1 - u) * (1 - v) + h10 * u * (1 - v) + h01 * (1 - u) * v + h11 * u * v;
    }
    double dh_du(double v) const { return (h10 - h00) * (1 - v) + (h11 - h01) * v; }
    double dh_dv(double u) const { return (h01 - h00) * (1 - u) + (h11 - h10) * u; }
};

Patch load_patch(const DtmGrid& dtm, int col, int row) {
    Patch p;
    p.col = col;
    p.row = row;
    p.h00 = dtm.at(col, row);
    p.h10 = dtm.at(col + 1, row);
    p.h01 = dtm.at(col, row + 1);
    p.h11 = dtm.at(col + 1, row + 1);
    const double nd = dtm.nodata();
    if (p.h00 == nd || p.h10 == nd || p.h01 == nd || p.h11 == nd) {
        throw NavError(ErrorCode::NoDataCell,
                       "cell (" + std::to_string(col) + ", " + std::to_string(row) + ") touches NODATA");
    }
    return p;
}

struct Locator {
    Patch patch;
    double u = 0;
    double v = 0;
};

Locator locate(const DtmGrid& dtm, double x, double y) {
    if (!dtm.contains(x, y)) {
        throw NavError(ErrorCode::OutOfBounds,
                       "query (" + std::to_string(x) + ", " + std::to_string(y) + ") outside grid");
    }
    const double fx = (x - dtm.min_x()) / dtm.cellsize();
    const double fy = (y - dtm.min_y()) / dtm.cellsize();
    const int col = std::clamp(static_cast<int>(std::floor(fx)), 0, dtm.ncols() - 2);
    const int row = std::clamp(static_cast<int>(std::floor(fy)), 0, dtm.nrows() - 2);
    return {load_patch(dtm, col, row), fx - col, fy - row};
}

Vec3 patch_normal(const Patch& p, double u, double v, double cellsize) {
    const Vec3 n(-p.dh_du(v) / cellsize, -p.dh_dv(u) / cellsize, 1.0);
    return n.normalized();
}

/// Cell index along one axis for a point on the ray, breaking ties on cell
/// boundaries towards the side the ray is moving into.
int cell_index(double f, double dir, int max_index) {
    double fl = std::floor(f);
    if (fl == f && dir < 0.0) fl -= 1.0;
    return std::clamp(static_cast<int>(fl), 0, max_index);
}

}  // namespace

double height_at(const DtmGrid& dtm, double x, double y) {
    const Locator loc = locate(dtm, x, y);
    return loc.patch.height(loc.u, loc.v);
}

Vec3 normal_at(const DtmGrid& dtm, double x, double y) {
    const Locator loc = locate(dtm, x, y);
    return patch_normal(loc.patch, loc.u, loc.v, dtm.cellsize());
}

TangentPlane raycast(const DtmGrid& dtm, const Vec3& origin, const Vec3& dir) {
    require_unit(dir, "ray direction");
    if (!origin.allFinite()) throw NavError(ErrorCode::InvalidArgument, "ray origin not finite");

    const double cs = dtm.cellsize();
    const double ztol = 1e-9 * cs;
    const double horiz = std::hypot(dir.x(), dir.y());

    auto finish = [&](const Vec3& g) { return TangentPlane{g, normal_at(dtm, g.x(), g.y())}; };

    if (dtm.contains(origin.x(), origin.y())) {
        const double h = height_at(dtm, origin.x(), origin.y());
        if (origin.z() < h) throw NavError(ErrorCode::StartsBelowTerrain, "ray origin below surface");
        if (origin.z() - h <= ztol) return finish(origin);
        if (horiz < 1e-15) {
            if (dir.z() > 0.0) throw NavError(ErrorCode::NoIntersection, "ray points skyward");
            return finish(Vec3(origin.x(), origin.y(), h));
        }
    } else if (horiz < 1e-15) {
        throw NavError(ErrorCode::NoIntersection, "vertical ray outside grid");
    }

    // clip the ray against the interpolable xy rectangle
    double t_enter = 0.0;
    double t_exit = std::numeric_limits<double>::infinity();
    const double lo[2] = {dtm.min_x(), dtm.min_y()};
    const double hi[2] = {dtm.max_x(), dtm.max_y()};
    for (int a = 0; a < 2; ++a) {
        const double o = origin[a];
        const double d = dir[a];
        if (d == 0.0) {
            if (o < lo[a] || o > hi[a]) throw NavError(ErrorCode::NoIntersection, "ray misses grid");
            continue;
        }
        double t0 = (lo[a] - o) / d;
        double t1 = (hi[a] - o) / d;
        if (t0 > t1) std::swap(t0, t1);
        t_enter = std::max(t_enter, t0);
        t_exit = std::min(t_exit, t1);
    }
    if (!(t_exit >= t_enter)) throw NavError(ErrorCode::NoIntersection, "ray misses grid");

    const double max_h = dtm.max_height();
    if (dir.z() >= 0.0 && origin.z() + dir.z() * t_enter > max_h) {
        throw NavError(ErrorCode::NoIntersection, "ray passes above terrain");
    }

    const Vec3 entry = origin + t_enter * dir;
    int col = cell_index((entry.x() - dtm.min_x()) / cs, dir.x(), dtm.ncols() - 2);
    int row = cell_index((entry.y() - dtm.min_y()) / cs, dir.y(), dtm.nrows() - 2);
    const int step_c = dir.x() > 0 ? 1 : -1;
    const int step_r = dir.y() > 0 ? 1 : -1;
    const double inf = std::numeric_limits<double>::infinity();

    auto next_boundary_t = [&](int idx, int axis) {
        const double d = dir[axis];
        if (d == 0.0) return inf;
        const double base = axis == 0 ? dtm.min_x() : dtm.min_y();
        const double b = base + (idx + (d > 0 ? 1 : 0)) * cs;
        return (b - origin[axis]) / d;
    };

    double t_cur = t_enter;
    while (true) {
        const Patch patch = load_patch(dtm, col, row);
        const double x0 = dtm.sample_x(col);
        const double y0 = dtm.sample_y(row);
        // g(t) = ray height - surface height, quadratic in t inside one patch
        auto g = [&](double t) {
            const double u = (origin.x() + t * dir.x() - x0) / cs;
            const double v = (origin.y() + t * dir.y() - y0) / cs;
            return origin.z() + t * dir.z() - patch.height(u, v);
        };

        const double tx = next_boundary_t(col, 0);
        const double ty = next_boundary_t(row, 1);
        const double t_end = std::min({tx, ty, t_exit});

        const double ga = g(t_cur);
        double bracket_hi = -1.0;
        if (ga <= 0.0) {
            return finish(origin + t_cur * dir);
        }
        if (g(t_end) <= 0.0) {
            bracket_hi = t_end;
        } else {
            // a convex dip can cross twice inside one patch; test its vertex
            const double du = dir.x() / cs;
            const double dv = dir.y() / cs;
            const double u0 = (origin.x() - x0) / cs;
            const double v0 = (origin.y() - y0) / cs;
            const double b = patch.h10 - patch.h00;
            const double c = patch.h01 - patch.h00;
            const double e = patch.h11 - patch.h10 - patch.h01 + patch.h00;
            const double c2 = -e * du * dv;
            if (c2 > 0.0) {
                const double c1 = dir.z() - b * du - c * dv - e * (u0 * dv + v0 * du);
                const double tv = -c1 / (2.0 * c2);
                if (tv > t_cur && tv < t_end && g(tv) <= 0.0) bracket_hi = tv;
            }
        }

        if (bracket_hi >= 0.0) {
            double a = t_cur;
            double b = bracket_hi;
            for (int it = 0; it < 200; ++it) {
                const double m = 0.5 * (a + b);
                if (m <= a || m >= b) break;
                const double gm = g(m);
                if (gm > 0.0) {
                    a = m;
                } else {
                    b = m;
                }
                if (b - a <= 1e-15 * (1.0 + std::abs(b)) && std::abs(g(b)) < ztol) break;
            }
            const double t_hit = std::abs(g(a)) < std::abs(g(b)) ? a : b;
            return finish(origin + t_hit * dir);
        }

        if (t_end >= t_exit) throw NavError(ErrorCode::NoIntersection, "ray leaves grid");
        if (dir.z() >= 0.0 && origin.z() + dir.z() * t_end > max_h) {
            throw NavError(ErrorCode::NoIntersection, "ray climbs above terrain");
        }
        if (tx <= ty) col += step_c;
        if (ty <= tx) row += step_r;
        if (col < 0 || col > dtm.ncols() - 2 || row < 0 || row > dtm.nrows() - 2) {
            throw NavError(ErrorCode::NoIntersection, "ray leaves grid");
        }
        t_cur = t_end;
    }
}

DtmGrid with_height_noise(const DtmGrid& dtm, double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw NavError(ErrorCode::InvalidArgument, "negative height noise");
    std::vector<double> h = dtm.heights();
    if (sigma > 0.0) {
        Rng rng(seed, 0x7e44a1);
        for (double& v : h) {
            if (v != dtm.nodata()) v += rng.normal(0.0, sigma);
        }
    }
    return DtmGrid(dtm.ncols(), dtm.nrows(), dtm.origin_x(), dtm.origin_y(), dtm.cellsize(), std::move(h),
                   dtm.nodata());
}

}  // namespace dtmnav
