#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include "dtmnav/geometry.hpp"

namespace dtmnav {

/// Regular heightmap. Samples sit at cell centres of an ESRI grid:
/// sample (col, row) is at x = origin_x + (col + 0.5) * cellsize,
/// y = origin_y + (row + 0.5) * cellsize, with row 0 the southernmost row.
/// The continuous surface is the bilinear interpolant of the samples and is
/// only defined over the convex hull of the sample centres.
class DtmGrid {
public:
    static constexpr double kDefaultNoData = -9999.0;

    DtmGrid() = default;
    /// Heights are row-major, south to north. Throws InvalidArgument on bad
    /// dimensions or non-finite data heights.
    DtmGrid(int ncols, int nrows, double origin_x, double origin_y, double cellsize,
            std::vector<double> heights, double nodata = kDefaultNoData);

    int ncols() const { return ncols_; }
    int nrows() const { return nrows_; }
    double origin_x() const { return origin_x_; }
    double origin_y() const { return origin_y_; }
    double cellsize() const { return cellsize_; }
    double nodata() const { return nodata_; }

    /// Footprint of the grid, ncols * cellsize by nrows * cellsize.
    double extent_x() const { return ncols_ * cellsize_; }
    double extent_y() const { return nrows_ * cellsize_; }

    double sample_x(int col) const { return origin_x_ + (col + 0.5) * cellsize_; }
    double sample_y(int row) const { return origin_y_ + (row + 0.5) * cellsize_; }
    /// Bounds of the interpolable region.
    double min_x() const { return sample_x(0); }
    double max_x() const { return sample_x(ncols_ - 1); }
    double min_y() const { return sample_y(0); }
    double max_y() const { return sample_y(nrows_ - 1); }
    bool contains(double x, double y) const;

    double at(int col, int row) const { return heights_[static_cast<std::size_t>(row) * ncols_ + col]; }
    double& at(int col, int row) { return heights_[static_cast<std::size_t>(row) * ncols_ + col]; }
    bool is_nodata(int col, int row) const { return at(col, row) == nodata_; }
    const std::vector<double>& heights() const { return heights_; }

    /// Extremes over data samples.
    double min_height() const { return min_h_; }
    double max_height() const { return max_h_; }

    bool operator==(const DtmGrid& o) const = default;

private:
    void refresh_range();

    int ncols_ = 0;
    int nrows_ = 0;
    double origin_x_ = 0.0;
    double origin_y_ = 0.0;
    double cellsize_ = 1.0;
    double nodata_ = kDefaultNoData;
    std::vector<double> heights_;
    double min_h_ = 0.0;
    double max_h_ = 0.0;
};

/// Point on the surface plus the upward unit normal of the tangent plane there.
struct TangentPlane {
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
};

/// Bilinear height. Throws OutOfBounds or NoDataCell.
double height_at(const DtmGrid& dtm, double x, double y);

/// Upward unit normal of the bilinear patch containing (x, y).
Vec3 normal_at(const DtmGrid& dtm, double x, double y);

/// First intersection of the ray origin + t * dir (t >= 0) with the surface.
/// Throws NoIntersection, StartsBelowTerrain, NoDataCell, InvalidDirection.
TangentPlane raycast(const DtmGrid& dtm, const Vec3& origin, const Vec3& dir);

/// ESRI ASCII grid I/O. Load throws MalformedHeader / RowLengthMismatch /
/// IoError; save writes shortest round-trip decimal representations.
DtmGrid load_dtm(const std::filesystem::path& path);
void save_dtm(const DtmGrid& dtm, const std::filesystem::path& path);
DtmGrid parse_dtm(const std::string& text);
std::string format_dtm(const DtmGrid& dtm);

struct FractalOptions {
    /// Longest feature wavelength as a fraction of the larger grid side.
    double base_wavelength_fraction = 0.25;
    int octaves = 5;
    /// Amplitude ratio between successive octaves.
    double persistence = 0.5;
};

/// Deterministic smooth fractal heightmap (multi-octave value noise on
/// bicubically interpolated lattices), affinely rescaled so min == 0 and
/// max == relief. Throws InvalidArgument for relief <= 0 or bad dimensions.
DtmGrid generate_fractal_terrain(std::uint64_t seed, int ncols, int nrows, double cellsize, double relief,
                                 const FractalOptions& options = {});

/// Copy of dtm with independent N(0, sigma) noise added to every data sample.
DtmGrid with_height_noise(const DtmGrid& dtm, double sigma, std::uint64_t seed);

}  // namespace dtmnav
