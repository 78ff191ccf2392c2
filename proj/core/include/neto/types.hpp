#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <stdexcept>
#include <string>

namespace neto {

template <typename T>
using Vec3T = Eigen::Matrix<T, 3, 1>;
template <typename T>
using Vec2T = Eigen::Matrix<T, 2, 1>;
template <typename T>
using MatXT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VecXT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Vec3 = Vec3T<double>;
using Vec2 = Vec2T<double>;
using Mat3 = Eigen::Matrix3d;
using MatX = MatXT<double>;
using VecX = VecXT<double>;

/// Mathematically invalid input (e.g. a refraction query from the wrong
/// side of the interface).
struct DomainError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Query outside the valid range of an object (e.g. a pixel off the sensor).
struct OutOfBoundsError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Broken or truncated file content.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unusable run configuration or command line.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Isosurface extraction found no sign change inside the requested bound.
struct EmptyFieldError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace neto
