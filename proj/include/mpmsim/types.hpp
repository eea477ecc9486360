#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mpmsim {

using Real = double;
using Vec3 = Eigen::Matrix<Real, 3, 1>;
using Mat3 = Eigen::Matrix<Real, 3, 3, Eigen::RowMajor>;
using Quat = Eigen::Quaternion<Real>;
using Index3 = std::array<int, 3>;

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A physical or numerical parameter lies outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// det(F) <= 0 encountered where a positive volume ratio is required.
class InvertedElementError : public Error {
 public:
  InvertedElementError(std::size_t particle, Real det)
      : Error("inverted element at particle " + std::to_string(particle) +
              " (det F = " + std::to_string(det) + ")"),
        particle_(particle),
        det_(det) {}

  std::size_t particle() const noexcept { return particle_; }
  Real determinant() const noexcept { return det_; }

 private:
  std::size_t particle_;
  Real det_;
};

/// A particle sits too close to the domain faces for the 3x3x3 stencil.
class StencilRangeError : public Error {
 public:
  using Error::Error;
};

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

}  // namespace mpmsim
