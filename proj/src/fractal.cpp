#include <algorithm>
#include <cmath>

#include "dtmnav/errors.hpp"
#include "dtmnav/random.hpp"
#include "dtmnav/terrain.hpp"

namespace dtmnav {

namespace {

double catmull_rom(double p0, double p1, double p2, double p3, double t) {
    return p1 + 0.5 * t * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)));
}

/// One octave: random lattice values with spacing `wavelength`, interpolated
/// bicubically so the sum stays C1 at every scale.
class LatticeOctave {
public:
    LatticeOctave(Rng& rng, double wavelength, double extent_x, double extent_y)
        : wavelength_(wavelength), shift_x_(rng.uniform()), shift_y_(rng.uniform()) {
        nx_ = static_cast<int>(std::ceil(extent_x / wavelength)) + 4;
        ny_ = static_cast<int>(std::ceil(extent_y / wavelength)) + 4;
        values_.resize(static_cast<std::size_t>(nx_) * ny_);
        for (double& v : values_) v = rng.uniform(-1.0, 1.0);
    }

    double operator()(double x, double y) const {
        const double fx = x / wavelength_ + shift_x_ + 1.0;
        const double fy = y / wavelength_ + shift_y_ + 1.0;
        const int ix = static_cast<int>(std::floor(fx));
        const int iy = static_cast<int>(std::floor(fy));
        const double tx = fx - ix;
        const double ty = fy - iy;
        double col[4];
        for (int j = 0; j < 4; ++j) {
            const int yy = std::clamp(iy - 1 + j, 0, ny_ - 1);
            col[j] = catmull_rom(at(ix - 1, yy), at(ix, yy), at(ix + 1, yy), at(ix + 2, yy), tx);
        }
        return catmull_rom(col[0], col[1], col[2], col[3], ty);
    }

private:
    double at(int i, int j) const {
        i = std::clamp(i, 0, nx_ - 1);
        return values_[static_cast<std::size_t>(j) * nx_ + i];
    }

    double wavelength_;
    double shift_x_;
    double shift_y_;
    int nx_ = 0;
    int ny_ = 0;
    std::vector<double> values_;
};

}  // namespace

DtmGrid generate_fractal_terrain(std::uint64_t seed, int ncols, int nrows, double cellsize, double relief,
                                 const FractalOptions& options) {
    if (!(relief > 0.0) || !std::isfinite(relief)) {
        throw NavError(ErrorCode::InvalidArgument, "relief must be positive");
    }
    if (ncols < 2 || nrows < 2 || !(cellsize > 0.0)) {
        throw NavError(ErrorCode::InvalidArgument, "bad grid dimensions");
    }
    if (options.octaves < 1 || !(options.base_wavelength_fraction > 0.0)) {
        throw NavError(ErrorCode::InvalidArgument, "bad fractal options");
    }

    const double ex = ncols * cellsize;
    const double ey = nrows * cellsize;
    const double base = options.base_wavelength_fraction * std::max(ex, ey);

    std::vector<LatticeOctave> octaves;
    std::vector<double> amplitude;
    double amp = 1.0;
    double wavelength = base;
    for (int k = 0; k < options.octaves; ++k) {
        Rng rng(seed, static_cast<std::uint64_t>(k));
        octaves.emplace_back(rng, wavelength, ex, ey);
        amplitude.push_back(amp);
        amp *= options.persistence;
        wavelength *= 0.5;
    }

    std::vector<double> h(static_cast<std::size_t>(ncols) * nrows, 0.0);
    for (int r = 0; r < nrows; ++r) {
        const double y = (r + 0.5) * cellsize;
        for (int c = 0; c < ncols; ++c) {
            const double x = (c + 0.5) * cellsize;
            double sum = 0.0;
            for (std::size_t k = 0; k < octaves.size(); ++k) sum += amplitude[k] * octaves[k](x, y);
            h[static_cast<std::size_t>(r) * ncols + c] = sum;
        }
    }

    const auto [lo_it, hi_it] = std::minmax_element(h.begin(), h.end());
    const double lo = *lo_it;
    const double span = *hi_it - lo;
    if (!(span > 0.0)) throw NavError(ErrorCode::InvalidArgument, "degenerate fractal field");
    for (double& v : h) v = (v - lo) / span * relief;
    return DtmGrid(ncols, nrows, 0.0, 0.0, cellsize, std::move(h));
}

}  // namespace dtmnav
