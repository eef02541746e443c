#include "qnd/constants.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace qnd {

double PhysicalConstants::ground_offset(int f) const {
  // Hyperfine interval rule for I=3/2, J=1/2: F=2 sits at +3/8, F=1 at -5/8.
  if (f == 2) return 0.375 * ground_splitting;
  if (f == 1) return -0.625 * ground_splitting;
  throw std::invalid_argument("ground hyperfine level must be 1 or 2");
}

double PhysicalConstants::transition_offset(int f, int f_prime) const {
  if (f_prime < 0 || f_prime > 3) throw std::invalid_argument("excited hyperfine level must be 0..3");
  const double ref = excited_offsets[3] - ground_offset(2);
  return (excited_offsets[static_cast<std::size_t>(f_prime)] - ground_offset(f)) - ref;
}

void PhysicalConstants::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string("constant must be positive: ") + name);
  };
  positive(speed_of_light, "speed_of_light");
  positive(d2_wavelength, "d2_wavelength");
  positive(gamma, "gamma");
  positive(ground_splitting, "ground_splitting");
  if (std::abs(oscillator_strength - 2.0 / 3.0) > 1e-12)
    throw std::invalid_argument("D2 oscillator strength must be 2/3");
  for (std::size_t k = 1; k < excited_offsets.size(); ++k) {
    if (!(excited_offsets[k] > excited_offsets[k - 1]))
      throw std::invalid_argument("excited hyperfine offsets must increase with F'");
  }
  if (nuclear_spin != 1.5) throw std::invalid_argument("only I=3/2 (Rb-87) is supported");
}

PhysicalConstants PhysicalConstants::rb87() {
  PhysicalConstants c;
  c.speed_of_light = 299792458.0;
  c.d2_wavelength = 780.241209686e-9;
  c.gamma = hz_to_angular(6.0666e6);
  c.ground_splitting = hz_to_angular(6.834682610904e9);
  c.excited_offsets = {hz_to_angular(-302.0738e6), hz_to_angular(-229.8518e6), hz_to_angular(-72.9112e6),
                       hz_to_angular(193.7407e6)};
  c.oscillator_strength = 2.0 / 3.0;
  c.nuclear_spin = 1.5;
  c.line_strengths = {{{1, 0}, 1.0 / 6.0}, {{1, 1}, 5.0 / 12.0}, {{1, 2}, 5.0 / 12.0},
                      {{2, 1}, 1.0 / 20.0}, {{2, 2}, 1.0 / 4.0},  {{2, 3}, 7.0 / 10.0}};
  c.version = "rb87-d2-2.3.3";
  return c;
}

PhysicalConstants constants_from_json(const nlohmann::json& j) {
  PhysicalConstants c;
  c.speed_of_light = j.value("speed_of_light_m_s", 299792458.0);
  c.d2_wavelength = j.at("d2_wavelength_m").get<double>();
  c.gamma = hz_to_angular(j.at("gamma_hz").get<double>());
  c.ground_splitting = hz_to_angular(j.at("ground_splitting_hz").get<double>());
  const auto& ex = j.at("excited_splittings_hz");
  if (!ex.is_array() || ex.size() != 4) throw std::invalid_argument("excited_splittings_hz must hold 4 values");
  for (std::size_t k = 0; k < 4; ++k) c.excited_offsets[k] = hz_to_angular(ex[k].get<double>());
  c.oscillator_strength = j.value("oscillator_strength", 2.0 / 3.0);
  c.nuclear_spin = j.value("nuclear_spin", 1.5);
  for (const auto& [fkey, row] : j.at("line_strengths").items()) {
    const int f = std::stoi(fkey.substr(1));
    for (const auto& [fpkey, v] : row.items()) c.line_strengths[{f, std::stoi(fpkey)}] = v.get<double>();
  }
  c.version = j.at("version").get<std::string>();
  c.validate();
  return c;
}

nlohmann::json constants_to_json(const PhysicalConstants& c) {
  nlohmann::json j;
  j["version"] = c.version;
  j["speed_of_light_m_s"] = c.speed_of_light;
  j["d2_wavelength_m"] = c.d2_wavelength;
  j["gamma_hz"] = angular_to_hz(c.gamma);
  j["ground_splitting_hz"] = angular_to_hz(c.ground_splitting);
  j["excited_splittings_hz"] = nlohmann::json::array();
  for (double e : c.excited_offsets) j["excited_splittings_hz"].push_back(angular_to_hz(e));
  j["oscillator_strength"] = c.oscillator_strength;
  j["nuclear_spin"] = c.nuclear_spin;
  for (const auto& [key, v] : c.line_strengths)
    j["line_strengths"]["F" + std::to_string(key.first)][std::to_string(key.second)] = v;
  return j;
}

PhysicalConstants load_constants(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open constants file: " + path.string());
  return constants_from_json(nlohmann::json::parse(in));
}

}  // namespace qnd
