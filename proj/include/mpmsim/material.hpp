#pragma once

#include "mpmsim/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace mpmsim {

struct LameParameters {
  Real mu = 0;
  Real lambda = 0;
};

/// Lamé parameters from Young's modulus and Poisson ratio.
inline LameParameters lame_from_young_poisson(Real young, Real poisson) {
  if (!(young > 0)) throw ParameterError("Young's modulus must be positive");
  if (!(poisson >= 0 && poisson < 0.5))
    throw ParameterError("Poisson ratio must lie in [0, 0.5)");
  return {young / (2 * (1 + poisson)),
          young * poisson / ((1 + poisson) * (1 - 2 * poisson))};
}

/// Isotropic elastic material. mu/lambda are always derived, never set directly.
class Material {
 public:
  Material(Real young_modulus, Real poisson_ratio, Real density)
      : young_(young_modulus), poisson_(poisson_ratio), density_(density) {
    if (!(density > 0)) throw ParameterError("density must be positive");
    lame_ = lame_from_young_poisson(young_modulus, poisson_ratio);
  }

  Real young_modulus() const noexcept { return young_; }
  Real poisson_ratio() const noexcept { return poisson_; }
  Real density() const noexcept { return density_; }
  Real mu() const noexcept { return lame_.mu; }
  Real lambda() const noexcept { return lame_.lambda; }

 private:
  Real young_;
  Real poisson_;
  Real density_;
  LameParameters lame_;
};

/// Smallest volume ratio admitted into log(J) by the clamped stress path.
inline constexpr Real kMinVolumeRatio = 1e-6;

/// First Piola-Kirchhoff stress of compressible Neo-Hookean elasticity:
/// P = mu (F - F^-T) + lambda log(J) F^-T.
inline Mat3 neo_hookean_stress(const Mat3& F, Real mu, Real lambda,
                               std::size_t particle = 0) {
  const Real J = F.determinant();
  if (!(J > 0)) throw InvertedElementError(particle, J);
  const Mat3 F_inv_T = F.inverse().transpose();
  return mu * (F - F_inv_T) + lambda * std::log(J) * F_inv_T;
}

/// Stored energy density whose gradient with respect to F is neo_hookean_stress.
inline Real energy_density(const Mat3& F, Real mu, Real lambda,
                           std::size_t particle = 0) {
  const Real J = F.determinant();
  if (!(J > 0)) throw InvertedElementError(particle, J);
  const Real log_J = std::log(J);
  return 0.5 * mu * ((F.transpose() * F).trace() - 3) - mu * log_J +
         0.5 * lambda * log_J * log_J;
}

/// Kirchhoff stress tau = P(F) F^T, computed without forming F^-1.
/// Never throws: det(F) is clamped to kMinVolumeRatio inside log. The second
/// member reports whether the clamp fired.
inline std::pair<Mat3, bool> kirchhoff_stress_clamped(const Mat3& F, Real mu,
                                                      Real lambda) {
  const Real J = F.determinant();
  const bool inverted = !(J > 0);
  const Real log_J = std::log(std::max(J, kMinVolumeRatio));
  Mat3 tau = mu * (F * F.transpose());
  tau.diagonal().array() += lambda * log_J - mu;
  return {tau, inverted};
}

}  // namespace mpmsim
