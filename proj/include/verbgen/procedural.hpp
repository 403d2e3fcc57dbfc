#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "verbgen/kinematics.hpp"

namespace verbgen {

/// How the movable part is attached to the body.
enum class PartLayout {
  TopLid,          // lid on the top face, hinged about the back edge
  FrontDoorSide,   // door on the camera-facing face, hinged about a vertical edge
  FrontDoorBottom, // door on the camera-facing face, hinged about the bottom edge
  FrontDrawer,     // drawer sliding out of the camera-facing face
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Parameter ranges for one procedural category. Sizes are full extents in meters.
struct CategorySpec {
  std::string name;
  PartLayout layout = PartLayout::TopLid;
  Range size_x, size_y, size_z;
  Range part_thickness;
  /// Revolute: radians. Prismatic: fraction of the body depth.
  Range joint_upper;
  /// Drawer height as a fraction of the body height (drawers only).
  Range drawer_height{0.3, 0.5};
  bool handle = false;
  Range color{0.15, 0.95};
};

class CategoryConfig {
 public:
  /// The configuration compiled into the library.
  static const CategoryConfig& builtin();
  static CategoryConfig from_json(const nlohmann::json& doc);
  static CategoryConfig load(const std::string& path);

  int schema_version() const { return version_; }
  const CategorySpec& at(const std::string& category) const;
  bool contains(const std::string& category) const { return specs_.count(category) > 0; }
  std::vector<std::string> names() const;

 private:
  int version_ = 1;
  std::map<std::string, CategorySpec> specs_;
};

ObjectModel generate_procedural(const std::string& category, std::uint64_t seed,
                                const CategoryConfig& config = CategoryConfig::builtin());

}  // namespace verbgen
