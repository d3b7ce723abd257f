#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace mixtraffic {

enum class VehicleClass { passenger, semi_truck, motorcycle, delivery_truck, bus };
inline constexpr std::array<VehicleClass, 5> kVehicleClasses{
    VehicleClass::passenger, VehicleClass::semi_truck, VehicleClass::motorcycle, VehicleClass::delivery_truck,
    VehicleClass::bus};

enum class Role { hv, rv };

std::string to_string(VehicleClass cls);
VehicleClass vehicle_class_from_string(std::string_view name);
std::string to_string(Role role);

// Bumper-to-bumper length in meters.
double class_length(VehicleClass cls);
// Drawing width in meters (only used by the rasterizer).
double class_width(VehicleClass cls);

using VehicleId = std::uint64_t;

// arc_pos is the front bumper position on (edge_id, lane_index).
struct VehicleState {
  VehicleId id = 0;
  VehicleClass cls = VehicleClass::passenger;
  Role role = Role::hv;
  double length = 5.0;
  int edge_id = 0;
  int lane_index = 0;
  double arc_pos = 0.0;
  double velocity = 0.0;
  double last_accel = 0.0;
  int route = 0;
  // Seconds spent continuously below the standstill speed.
  double waiting = 0.0;
  // Agent slot for RVs under policy control, -1 otherwise.
  int slot = -1;

  bool operator==(const VehicleState&) const = default;
};

}  // namespace mixtraffic
