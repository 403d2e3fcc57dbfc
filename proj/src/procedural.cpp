#include "verbgen/procedural.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "verbgen/error.hpp"
#include "verbgen/seed.hpp"
#include "categories_json.hpp"

namespace verbgen {

namespace {

PartLayout parse_layout(const std::string& s) {
  if (s == "top-lid") return PartLayout::TopLid;
  if (s == "front-door-side") return PartLayout::FrontDoorSide;
  if (s == "front-door-bottom") return PartLayout::FrontDoorBottom;
  if (s == "front-drawer") return PartLayout::FrontDrawer;
  throw Error(ErrorCode::InvalidArgument, "unknown part layout '" + s + "'");
}

Range parse_range(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2)
    throw Error(ErrorCode::InvalidArgument, what + " must be a [lo, hi] pair");
  Range r{j[0].get<double>(), j[1].get<double>()};
  if (!(r.lo <= r.hi)) throw Error(ErrorCode::InvalidArgument, what + " has lo > hi");
  return r;
}

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : state_(seed) {}
  double unit() { return static_cast<double>(mix_seed(state_++) >> 11) * 0x1p-53; }
  double in(const Range& r) { return r.lo + (r.hi - r.lo) * unit(); }

 private:
  std::uint64_t state_;
};

std::uint64_t category_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

Eigen::Vector3d draw_color(Sampler& rng, const Range& r, const std::vector<Eigen::Vector3d>& avoid) {
  Eigen::Vector3d c;
  for (int attempt = 0; attempt < 64; ++attempt) {
    c = {rng.in(r), rng.in(r), rng.in(r)};
    const bool distinct = std::all_of(avoid.begin(), avoid.end(), [&](const auto& other) {
      return (c - other).cwiseAbs().sum() >= 0.45;
    });
    if (distinct) return c;
  }
  return c;
}

}  // namespace

const CategoryConfig& CategoryConfig::builtin() {
  static const CategoryConfig config = from_json(nlohmann::json::parse(kBuiltinCategoriesJson));
  return config;
}

CategoryConfig CategoryConfig::from_json(const nlohmann::json& doc) {
  CategoryConfig config;
  config.version_ = doc.value("schema_version", 1);
  if (config.version_ != 1)
    throw Error(ErrorCode::VersionMismatch,
                "category config schema_version " + std::to_string(config.version_));
  for (const auto& [name, j] : doc.at("categories").items()) {
    CategorySpec spec;
    spec.name = name;
    spec.layout = parse_layout(j.at("layout").get<std::string>());
    spec.size_x = parse_range(j.at("size_x"), name + ".size_x");
    spec.size_y = parse_range(j.at("size_y"), name + ".size_y");
    spec.size_z = parse_range(j.at("size_z"), name + ".size_z");
    spec.part_thickness = parse_range(j.at("part_thickness"), name + ".part_thickness");
    spec.joint_upper = parse_range(j.at("joint_upper"), name + ".joint_upper");
    if (j.contains("drawer_height"))
      spec.drawer_height = parse_range(j["drawer_height"], name + ".drawer_height");
    if (j.contains("color")) spec.color = parse_range(j["color"], name + ".color");
    spec.handle = j.value("handle", false);
    config.specs_.emplace(name, spec);
  }
  return config;
}

CategoryConfig CategoryConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open category config " + path);
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, path + ": " + e.what());
  }
}

const CategorySpec& CategoryConfig::at(const std::string& category) const {
  auto it = specs_.find(category);
  if (it == specs_.end()) {
    std::string known;
    for (const auto& [k, v] : specs_) known += (known.empty() ? "" : ", ") + k;
    throw Error(ErrorCode::UnknownCategory, "'" + category + "' (known: " + known + ")");
  }
  return it->second;
}

std::vector<std::string> CategoryConfig::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : specs_) out.push_back(k);
  return out;
}

ObjectModel generate_procedural(const std::string& category, std::uint64_t seed,
                                const CategoryConfig& config) {
  const CategorySpec& spec = config.at(category);
  Sampler rng(mix_seed(category_hash(category) ^ mix_seed(seed)));

  const double hx = 0.5 * rng.in(spec.size_x);
  const double hy = 0.5 * rng.in(spec.size_y);
  const double hz = 0.5 * rng.in(spec.size_z);
  const double t = rng.in(spec.part_thickness);
  const double upper = rng.in(spec.joint_upper);

  std::vector<Eigen::Vector3d> used;
  Link body{"body", {hx, hy, hz}, draw_color(rng, spec.color, used), {}};
  used.push_back(body.color);
  Link part;
  part.color = draw_color(rng, spec.color, used);
  used.push_back(part.color);

  Joint joint;
  joint.parent = "body";
  joint.kind = JointKind::Revolute;
  joint.lower = 0.0;
  joint.upper = upper;

  Joint mount;
  mount.name = "handle_mount";
  mount.kind = JointKind::Fixed;
  Link handle;
  handle.name = "handle";

  switch (spec.layout) {
    case PartLayout::TopLid:
      part.name = "lid";
      part.half_extents = {hx, hy, 0.5 * t};
      part.visual_origin.xyz = {hx, 0.0, 0.5 * t};
      joint.name = "lid_hinge";
      joint.origin.xyz = {-hx, 0.0, hz};
      joint.axis = {0.0, -1.0, 0.0};
      mount.origin.xyz = {2.0 * hx - 0.03, 0.0, t};
      handle.half_extents = {0.02, std::min(0.08, 0.4 * hy), 0.015};
      break;
    case PartLayout::FrontDoorSide:
      part.name = "door";
      part.half_extents = {0.5 * t, hy, hz};
      part.visual_origin.xyz = {0.5 * t, -hy, 0.0};
      joint.name = "door_hinge";
      joint.origin.xyz = {hx, hy, 0.0};
      joint.axis = {0.0, 0.0, 1.0};
      mount.origin.xyz = {t, -1.75 * hy, 0.0};
      handle.half_extents = {0.02, 0.025, std::min(0.09, 0.35 * hz)};
      break;
    case PartLayout::FrontDoorBottom:
      part.name = "door";
      part.half_extents = {0.5 * t, hy, hz};
      part.visual_origin.xyz = {0.5 * t, 0.0, hz};
      joint.name = "door_hinge";
      joint.origin.xyz = {hx, 0.0, -hz};
      joint.axis = {0.0, 1.0, 0.0};
      mount.origin.xyz = {t, 0.0, 1.75 * hz};
      handle.half_extents = {0.02, std::min(0.1, 0.4 * hy), 0.025};
      break;
    case PartLayout::FrontDrawer: {
      const double h = rng.in(spec.drawer_height) * 2.0 * hz;
      part.name = "drawer";
      part.half_extents = {0.9 * hx, 0.85 * hy, 0.45 * h};
      joint.name = "drawer_slide";
      joint.kind = JointKind::Prismatic;
      joint.origin.xyz = {0.12 * hx, 0.0, hz - 0.5 * h - 0.05 * hz};
      joint.axis = {1.0, 0.0, 0.0};
      joint.upper = upper * 2.0 * hx;
      mount.origin.xyz = {0.9 * hx + 0.02, 0.0, 0.0};
      handle.half_extents = {0.02, std::min(0.1, 0.4 * hy), 0.02};
      break;
    }
  }
  joint.child = part.name;

  std::vector<Link> links{body, part};
  std::vector<Joint> joints{joint};
  if (spec.handle) {
    handle.color = draw_color(rng, spec.color, used);
    handle.visual_origin.xyz = {handle.half_extents.x(), 0.0, 0.0};
    mount.parent = part.name;
    mount.child = handle.name;
    links.push_back(handle);
    joints.push_back(mount);
  }
  return ObjectModel(category + "-" + std::to_string(seed), std::move(links), std::move(joints));
}

}  // namespace verbgen
