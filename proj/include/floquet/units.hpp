#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace floquet {

namespace units {

/// hbar*omega [hartree] = kPhotonHartreeNm / lambda [nm]
inline constexpr double kPhotonHartreeNm = 45.56335;
/// I [W/cm^2] = kIntensityAu * E0^2 [a.u.]
inline constexpr double kIntensityAu = 3.50944e16;
inline constexpr double kHartreeToInvCm = 219474.63;
inline constexpr double kFemtosecondAu = 41.341374575751;
inline constexpr double kProtonMass = 1836.1527;
/// Intensities in loop specs and EP records are quoted in this unit.
inline constexpr double kIntensityUnit = 1e13;

}  // namespace units

/// Laser parameters. Intensity is stored in W/cm^2.
struct FieldPoint {
  double wavelength_nm = 800.0;
  double intensity = 0.0;

  FieldPoint() = default;
  FieldPoint(double wavelength, double intensity_wcm2) : wavelength_nm(wavelength), intensity(intensity_wcm2) {
    if (!(wavelength_nm > 0.0) || !std::isfinite(wavelength_nm))
      throw std::invalid_argument("FieldPoint: wavelength must be positive");
    if (!(intensity >= 0.0) || !std::isfinite(intensity))
      throw std::invalid_argument("FieldPoint: intensity must be non-negative");
  }

  static FieldPoint in_1e13(double wavelength, double intensity_1e13) {
    return {wavelength, intensity_1e13 * units::kIntensityUnit};
  }

  double omega() const { return units::kPhotonHartreeNm / wavelength_nm; }
  double e0() const { return std::sqrt(intensity / units::kIntensityAu); }
  double intensity_1e13() const { return intensity / units::kIntensityUnit; }
};

}  // namespace floquet
