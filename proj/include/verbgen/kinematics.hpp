#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Geometry>

namespace verbgen {

/// Translation plus URDF-style roll/pitch/yaw, R = Rz(yaw) * Ry(pitch) * Rx(roll).
struct Pose {
  Eigen::Vector3d xyz = Eigen::Vector3d::Zero();
  Eigen::Vector3d rpy = Eigen::Vector3d::Zero();

  Eigen::Isometry3d to_isometry() const;
  bool operator==(const Pose&) const = default;
};

Eigen::Matrix3d rotation_from_rpy(const Eigen::Vector3d& rpy);

enum class JointKind { Revolute, Prismatic, Fixed };

std::string_view to_string(JointKind kind);

struct Joint {
  std::string name;
  JointKind kind = JointKind::Fixed;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
  Pose origin;
  double lower = 0.0;
  double upper = 0.0;
  std::string parent;
  std::string child;

  bool operator==(const Joint&) const = default;
};

struct Link {
  std::string name;
  Eigen::Vector3d half_extents = Eigen::Vector3d::Constant(0.5);
  Eigen::Vector3d color = Eigen::Vector3d::Constant(0.5);
  Pose visual_origin;

  bool operator==(const Link&) const = default;
};

/// Validated articulated object: a tree of cuboid links connected by joints.
///
/// Construction checks referential integrity, the single-root tree shape,
/// unit axes and limit ordering. Degrees of freedom are the non-fixed joints
/// in document order; dof index i refers to `joints()[dof_joint(i)]`.
class ObjectModel {
 public:
  ObjectModel() = default;
  ObjectModel(std::string name, std::vector<Link> links, std::vector<Joint> joints);

  const std::string& name() const { return name_; }
  const std::vector<Link>& links() const { return links_; }
  const std::vector<Joint>& joints() const { return joints_; }
  const std::string& root() const { return links_[root_].name; }
  std::size_t root_index() const { return root_; }
  std::size_t n_dof() const { return dof_joints_.size(); }

  std::size_t dof_joint(std::size_t dof) const { return dof_joints_.at(dof); }
  const Joint& dof(std::size_t dof) const { return joints_[dof_joint(dof)]; }

  std::size_t link_index(std::string_view name) const;
  /// Joints ordered so every parent link is placed before its children.
  const std::vector<std::size_t>& topological_joints() const { return topo_; }
  /// Indices of the links in the subtree rooted at the child of `joint`.
  std::vector<std::size_t> subtree_links(std::size_t joint) const;

  bool operator==(const ObjectModel& other) const {
    return name_ == other.name_ && links_ == other.links_ && joints_ == other.joints_;
  }

 private:
  std::string name_;
  std::vector<Link> links_;
  std::vector<Joint> joints_;
  std::size_t root_ = 0;
  std::vector<std::size_t> dof_joints_;
  std::vector<std::size_t> topo_;
};

/// Root pose as (x, y, z, roll, pitch, yaw).
using RootPose = std::array<double, 6>;

struct ObjectState {
  RootPose root_pose{};
  std::vector<double> joint_positions;
  bool present = true;
  /// Dof whose child subtree is detached and lifted along world +z
  /// (part removal / insertion); -1 when nothing is detached.
  int detached_dof = -1;
  double detached_lift = 0.0;

  bool operator==(const ObjectState&) const = default;
};

/// Zero pose with every joint at its lower limit.
ObjectState closed_state(const ObjectModel& model);

ObjectModel parse_urdf(std::string_view xml);
ObjectModel load_urdf(const std::string& path);
std::string write_urdf(const ObjectModel& model);

/// World transform of every link, aligned with `model.links()`.
std::vector<Eigen::Isometry3d> link_transforms(const ObjectModel& model, const ObjectState& state);
std::map<std::string, Eigen::Isometry3d> forward_kinematics(const ObjectModel& model,
                                                            const ObjectState& state);

/// Adds `delta` (6 pose components then n_dof joint components) and clamps
/// every joint into its limits.
ObjectState apply_delta(const ObjectModel& model, const ObjectState& state,
                        std::span<const double> delta);

}  // namespace verbgen
