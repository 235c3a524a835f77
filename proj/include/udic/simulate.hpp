#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "udic/geometry.hpp"
#include "udic/tensor.hpp"

namespace udic {

struct Scatterer {
    Point2 position;         // [m]
    double amplitude = 0.0;  // unitless, in [-1, 1]
};

struct Phantom {
    std::vector<Scatterer> scatterers;
    double background_speed = 0.0;  // [m/s]
};

/// Gaussian-windowed cosine pulse; bandwidth_fraction is the -6 dB fractional
/// bandwidth of the envelope spectrum.
struct PulseWaveform {
    double center_frequency = 5e6;   // [Hz]
    double bandwidth_fraction = 0.6;

    double envelope_sigma() const;   // [s]
    double value(double t) const;
};

/// Bounds for random defect placement. Positions are drawn from
/// [x_min, x_max] x [z_min, z_max]; amplitudes from [amp_min, amp_max].
struct ScenarioConfig {
    std::size_t min_scatterers = 1;
    std::size_t max_scatterers = 4;
    double amp_min = 0.3;
    double amp_max = 1.0;
    double x_min = 0.0, x_max = 0.0;  // [m]
    double z_min = 0.0, z_max = 0.0;  // [m]

    void validate() const;
};

/// Seeded random phantom; deterministic for a fixed rng state.
Phantom sample_phantom(std::mt19937_64& rng, const ScenarioConfig& cfg,
                       double background_speed);

struct FmcResult {
    Tensor data;         // (n_t, n_s, n_r), normalized to [-1, 1]
    double scale = 1.0;  // physical amplitude the normalization divided by
};

/// Born-type superposition: each scatterer contributes a delayed copy of the
/// pulse on every source/receiver pair, f(t,s,m) = sum_k a_k w(t - tau_k).
FmcResult synthesize_fmc(const Phantom& phantom, const AcquisitionGeometry& geom,
                         const PulseWaveform& pulse);

}  // namespace udic
