#pragma once

#include <array>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>

namespace rotorlab {

inline constexpr std::size_t kAxes = 3;
inline constexpr std::size_t kRotors = 4;

using Vec3 = std::array<double, kAxes>;
using Vec4 = std::array<double, kRotors>;

enum class Axis : std::size_t { roll = 0, pitch = 1, yaw = 2 };

inline constexpr double rpm_to_rad_per_s(double rpm) { return rpm * 2.0 * std::numbers::pi / 60.0; }
inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

const char* axis_name(Axis axis);
Axis parse_axis(const std::string& name);

// Raised when an operation's precondition on its inputs is violated.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace rotorlab
