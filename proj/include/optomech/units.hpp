#pragma once

#include <numbers>

namespace optomech::units {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// CODATA 2018 exact / recommended values.
inline constexpr double hbar = 1.054571817e-34;      // J s
inline constexpr double speed_of_light = 299792458.0; // m/s

/// Angular frequency of a "2pi-implied" quantity quoted in Hz.
constexpr double angular(double hz) noexcept { return two_pi * hz; }

constexpr double kHz = 1e3;
constexpr double MHz = 1e6;
constexpr double GHz = 1e9;

} // namespace optomech::units
