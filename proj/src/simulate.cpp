#include "udic/simulate.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "udic/rng.hpp"

namespace udic {

double PulseWaveform::envelope_sigma() const {
    // Gaussian time envelope exp(-t^2 / (2 sigma^2)) whose spectrum has the
    // requested -6 dB full width bandwidth_fraction * f_c.
    const double half_width_hz = 0.5 * bandwidth_fraction * center_frequency;
    const double sigma_f = half_width_hz / std::sqrt(2.0 * std::numbers::ln2);
    return 1.0 / (2.0 * std::numbers::pi * sigma_f);
}

double PulseWaveform::value(double t) const {
    const double sigma = envelope_sigma();
    const double envelope = std::exp(-(t * t) / (2.0 * sigma * sigma));
    return envelope * std::cos(2.0 * std::numbers::pi * center_frequency * t);
}

void ScenarioConfig::validate() const {
    if (min_scatterers > max_scatterers)
        throw std::invalid_argument("scenario: min_scatterers exceeds max_scatterers");
    if (amp_min > amp_max || amp_min < -1.0 || amp_max > 1.0)
        throw std::invalid_argument("scenario: amplitudes must satisfy -1 <= min <= max <= 1");
    if (max_scatterers > 0 && (x_min > x_max || z_min > z_max))
        throw std::invalid_argument("scenario: empty feasible placement region");
}

Phantom sample_phantom(std::mt19937_64& rng, const ScenarioConfig& cfg,
                       double background_speed) {
    cfg.validate();
    Phantom phantom;
    phantom.background_speed = background_speed;
    const std::size_t span = cfg.max_scatterers - cfg.min_scatterers + 1;
    const std::size_t count = cfg.min_scatterers + uniform_index(rng, span);
    phantom.scatterers.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Scatterer s;
        s.position.x = uniform(rng, cfg.x_min, cfg.x_max);
        s.position.z = uniform(rng, cfg.z_min, cfg.z_max);
        s.amplitude = uniform(rng, cfg.amp_min, cfg.amp_max);
        phantom.scatterers.push_back(s);
    }
    return phantom;
}

FmcResult synthesize_fmc(const Phantom& phantom, const AcquisitionGeometry& geom,
                         const PulseWaveform& pulse) {
    geom.validate();
    if (!(pulse.center_frequency > 0.0) ||
        pulse.center_frequency >= 0.5 * geom.sampling_frequency)
        throw std::invalid_argument("synthesize_fmc: pulse violates the Nyquist limit");
    if (!(phantom.background_speed > 0.0))
        throw std::invalid_argument("synthesize_fmc: background speed must be positive");

    const std::size_t n_t = geom.n_time_samples;
    const std::size_t n_e = geom.n_elements();
    FmcResult result;
    result.data = Tensor({n_t, n_e, n_e});
    double* fd = result.data.data();

    const double dt = 1.0 / geom.sampling_frequency;
    for (const Scatterer& sc : phantom.scatterers) {
        for (std::size_t s = 0; s < n_e; ++s) {
            for (std::size_t m = 0; m < n_e; ++m) {
                const double tau = travel_time(sc.position, geom.element_positions[s],
                                               geom.element_positions[m],
                                               phantom.background_speed);
                for (std::size_t t = 0; t < n_t; ++t) {
                    const double sample_time =
                        geom.time_offset + static_cast<double>(t) * dt;
                    fd[(t * n_e + s) * n_e + m] +=
                        sc.amplitude * pulse.value(sample_time - tau);
                }
            }
        }
    }

    result.scale = max_abs(result.data);
    if (result.scale > 0.0) {
        result.data *= 1.0 / result.scale;
    } else {
        result.scale = 1.0;
    }
    return result;
}

}  // namespace udic
