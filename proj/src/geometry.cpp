#include "udic/geometry.hpp"

#include <stdexcept>

namespace udic {

void AcquisitionGeometry::validate() const {
    if (element_positions.empty())
        throw std::invalid_argument("geometry: need at least one element");
    if (!(sampling_frequency > 0.0))
        throw std::invalid_argument("geometry: sampling_frequency must be positive");
    if (!(sound_speed > 0.0))
        throw std::invalid_argument("geometry: sound_speed must be positive");
    if (n_time_samples < 1)
        throw std::invalid_argument("geometry: n_time_samples must be >= 1");
}

void ImagingGrid::validate() const {
    if (n_x < 1 || n_z < 1)
        throw std::invalid_argument("grid: pixel counts must be >= 1");
    if (!(pitch_x > 0.0) || !(pitch_z > 0.0))
        throw std::invalid_argument("grid: pixel pitches must be positive");
}

double travel_time(Point2 p, Point2 r_s, Point2 r_m, double c) {
    if (!(c > 0.0))
        throw std::invalid_argument("travel_time: sound speed must be positive");
    return (distance(p, r_s) + distance(p, r_m)) / c;
}

DelayTable build_delay_table(const AcquisitionGeometry& geom, const ImagingGrid& grid) {
    geom.validate();
    grid.validate();

    DelayTable table;
    table.n_x = grid.n_x;
    table.n_z = grid.n_z;
    table.n_t = geom.n_time_samples;
    table.n_s = geom.n_elements();
    table.n_r = geom.n_elements();

    const std::size_t n_entries = table.n_pixels() * table.n_s * table.n_r;
    table.fractional_index.resize(n_entries);
    table.valid.resize(n_entries);

    const double last_sample = static_cast<double>(table.n_t - 1);
    std::size_t e = 0;
    for (std::size_t ix = 0; ix < grid.n_x; ++ix) {
        for (std::size_t iz = 0; iz < grid.n_z; ++iz) {
            const Point2 p = grid.pixel_center(ix, iz);
            for (std::size_t s = 0; s < table.n_s; ++s) {
                for (std::size_t m = 0; m < table.n_r; ++m, ++e) {
                    const double tau = travel_time(p, geom.element_positions[s],
                                                   geom.element_positions[m],
                                                   geom.sound_speed);
                    const double idx = (tau - geom.time_offset) * geom.sampling_frequency;
                    table.fractional_index[e] = idx;
                    // Linear interpolation reads samples floor(idx) and
                    // floor(idx)+1, so both must lie inside [0, n_t-1].
                    const bool in_range = idx >= 0.0 && idx <= last_sample &&
                                          std::floor(idx) + 1.0 <= last_sample;
                    table.valid[e] = in_range ? 1 : 0;
                }
            }
        }
    }
    return table;
}

}  // namespace udic
