#include "mixtraffic/vehicle.hpp"

#include "mixtraffic/errors.hpp"

namespace mixtraffic {

std::string to_string(VehicleClass cls) {
  switch (cls) {
    case VehicleClass::passenger: return "passenger";
    case VehicleClass::semi_truck: return "semi_truck";
    case VehicleClass::motorcycle: return "motorcycle";
    case VehicleClass::delivery_truck: return "delivery_truck";
    case VehicleClass::bus: return "bus";
  }
  return "unknown";
}

VehicleClass vehicle_class_from_string(std::string_view name) {
  for (auto cls : kVehicleClasses) {
    if (to_string(cls) == name) return cls;
  }
  throw ConfigError("unknown vehicle class '" + std::string(name) + "'", "class_mix");
}

std::string to_string(Role role) { return role == Role::rv ? "rv" : "hv"; }

double class_length(VehicleClass cls) {
  switch (cls) {
    case VehicleClass::passenger: return 5.0;
    case VehicleClass::semi_truck: return 16.0;
    case VehicleClass::motorcycle: return 2.5;
    case VehicleClass::delivery_truck: return 8.0;
    case VehicleClass::bus: return 12.0;
  }
  return 5.0;
}

double class_width(VehicleClass cls) {
  switch (cls) {
    case VehicleClass::passenger: return 1.8;
    case VehicleClass::semi_truck: return 2.5;
    case VehicleClass::motorcycle: return 0.8;
    case VehicleClass::delivery_truck: return 2.2;
    case VehicleClass::bus: return 2.5;
  }
  return 1.8;
}

}  // namespace mixtraffic
