#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "udic/das.hpp"

namespace udic {

struct Point2 {
    double x = 0.0;  // [m] lateral
    double z = 0.0;  // [m] depth
};

inline double distance(Point2 a, Point2 b) {
    return std::hypot(a.x - b.x, a.z - b.z);
}

/// Full-matrix-capture acquisition: every element fires in turn and all
/// elements record, so n_s = n_r = n_elements.
struct AcquisitionGeometry {
    std::vector<Point2> element_positions;
    double sampling_frequency = 0.0;  // [Hz]
    double sound_speed = 0.0;         // [m/s]
    std::size_t n_time_samples = 0;
    double time_offset = 0.0;  // [s] acquisition start relative to firing

    std::size_t n_elements() const { return element_positions.size(); }
    void validate() const;  // throws std::invalid_argument
};

/// Regular 2D pixel grid; pixel (ix, iz) sits at origin + (ix*pitch_x, iz*pitch_z).
struct ImagingGrid {
    Point2 origin;
    double pitch_x = 0.0;  // [m]
    double pitch_z = 0.0;  // [m]
    std::size_t n_x = 0;
    std::size_t n_z = 0;

    Point2 pixel_center(std::size_t ix, std::size_t iz) const {
        return {origin.x + static_cast<double>(ix) * pitch_x,
                origin.z + static_cast<double>(iz) * pitch_z};
    }
    std::size_t n_pixels() const { return n_x * n_z; }
    void validate() const;
};

/// Two-leg straight-ray travel time (|p - r_s| + |p - r_m|) / c.
double travel_time(Point2 p, Point2 r_s, Point2 r_m, double c);

/// Fractional sample index (tau - time_offset) * f_samp for every
/// (pixel, source, receiver); entries outside the interpolation window are
/// flagged out-of-range.
DelayTable build_delay_table(const AcquisitionGeometry& geom, const ImagingGrid& grid);

}  // namespace udic
