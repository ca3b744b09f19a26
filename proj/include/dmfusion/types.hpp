#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace dmfusion {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

using ViewId = std::uint32_t;

using Rgb = std::array<std::uint8_t, 3>;

// Error hierarchy. The CLI maps InputError and its subclasses to exit code 1,
// everything else to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

class FormatError : public InputError {
 public:
  using InputError::InputError;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class RegistrationError : public Error {
 public:
  using Error::Error;
};

}  // namespace dmfusion
