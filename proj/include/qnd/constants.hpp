#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <numbers>
#include <string>

#include <nlohmann/json.hpp>

namespace qnd {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Convert an ordinary frequency (Hz) to an angular frequency (rad/s).
constexpr double hz_to_angular(double hz) { return two_pi * hz; }
constexpr double angular_to_hz(double omega) { return omega / two_pi; }

/// Atomic and fundamental constants for the Rb-87 D2 line.
///
/// All frequencies are angular (rad/s). Hyperfine level offsets are measured
/// from the respective fine-structure centroid; only differences enter the
/// physics.
struct PhysicalConstants {
  double speed_of_light = 0.0;     // m/s
  double d2_wavelength = 0.0;      // m
  double gamma = 0.0;              // excited-state linewidth, rad/s
  double ground_splitting = 0.0;   // F=2 above F=1, rad/s
  std::array<double, 4> excited_offsets{};  // F'=0..3, rad/s
  double oscillator_strength = 2.0 / 3.0;
  double nuclear_spin = 1.5;
  // Relative hyperfine transition strength factors S_{F F'} keyed by (F, F').
  std::map<std::pair<int, int>, double> line_strengths;
  std::string version;

  /// Ground level offset of hyperfine level F (1 or 2) from the centroid.
  [[nodiscard]] double ground_offset(int f) const;
  /// Transition frequency offset of F -> F' relative to F=2 -> F'=3.
  [[nodiscard]] double transition_offset(int f, int f_prime) const;

  /// Throws std::invalid_argument if any invariant is violated.
  void validate() const;

  /// Built-in table, identical to data/rb87_constants.json.
  static PhysicalConstants rb87();
};

PhysicalConstants constants_from_json(const nlohmann::json& j);
nlohmann::json constants_to_json(const PhysicalConstants& c);
PhysicalConstants load_constants(const std::filesystem::path& path);

}  // namespace qnd
