#pragma once

namespace decotime {

/// CODATA 2018 values, SI units. Never read from configuration.
struct PhysicalConstants {
    double hbar = 1.054571817e-34; // J s
    double kB = 1.380649e-23;      // J/K
    double eps0 = 8.8541878128e-12; // F/m
    double c = 299792458.0;        // m/s
};

inline constexpr PhysicalConstants kConstants{};

} // namespace decotime
