#include "verbgen/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "verbgen/error.hpp"

namespace verbgen {

namespace pt = boost::property_tree;

Eigen::Matrix3d rotation_from_rpy(const Eigen::Vector3d& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(rpy.y(), Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

Eigen::Isometry3d Pose::to_isometry() const {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() = rotation_from_rpy(rpy);
  t.translation() = xyz;
  return t;
}

std::string_view to_string(JointKind kind) {
  switch (kind) {
    case JointKind::Revolute: return "revolute";
    case JointKind::Prismatic: return "prismatic";
    case JointKind::Fixed: return "fixed";
  }
  return "?";
}

ObjectModel::ObjectModel(std::string name, std::vector<Link> links, std::vector<Joint> joints)
    : name_(std::move(name)), links_(std::move(links)), joints_(std::move(joints)) {
  if (links_.empty()) throw Error(ErrorCode::InvalidModel, "model has no links");

  std::set<std::string> names;
  for (const Link& l : links_) {
    if (!names.insert(l.name).second)
      throw Error(ErrorCode::InvalidModel, "duplicate link '" + l.name + "'");
    if ((l.half_extents.array() <= 0.0).any())
      throw Error(ErrorCode::InvalidModel, "link '" + l.name + "' has non-positive extents");
    if ((l.color.array() < 0.0).any() || (l.color.array() > 1.0).any())
      throw Error(ErrorCode::InvalidModel, "link '" + l.name + "' color outside [0,1]");
  }

  std::set<std::string> joint_names;
  std::vector<int> parent_joint(links_.size(), -1);
  for (std::size_t j = 0; j < joints_.size(); ++j) {
    const Joint& joint = joints_[j];
    if (!joint_names.insert(joint.name).second)
      throw Error(ErrorCode::InvalidModel, "duplicate joint '" + joint.name + "'");
    if (!names.count(joint.parent))
      throw Error(ErrorCode::UnknownLink,
                  "unknown link '" + joint.parent + "' in joint '" + joint.name + "'");
    if (!names.count(joint.child))
      throw Error(ErrorCode::UnknownLink,
                  "unknown link '" + joint.child + "' in joint '" + joint.name + "'");
    if (std::abs(joint.axis.norm() - 1.0) > 1e-9)
      throw Error(ErrorCode::InvalidModel, "joint '" + joint.name + "' axis is not unit length");
    if (joint.kind != JointKind::Fixed && !(joint.lower <= joint.upper))
      throw Error(ErrorCode::InvalidModel, "joint '" + joint.name + "' has lower > upper");
    if (joint.kind == JointKind::Fixed && (joint.lower != 0.0 || joint.upper != 0.0))
      throw Error(ErrorCode::InvalidModel, "fixed joint '" + joint.name + "' carries limits");
    const std::size_t child = link_index(joint.child);
    if (parent_joint[child] >= 0)
      throw Error(ErrorCode::CyclicJointGraph,
                  "link '" + joint.child + "' has more than one parent joint");
    parent_joint[child] = static_cast<int>(j);
  }

  std::vector<std::size_t> roots;
  for (std::size_t i = 0; i < links_.size(); ++i)
    if (parent_joint[i] < 0) roots.push_back(i);
  if (roots.empty()) throw Error(ErrorCode::CyclicJointGraph, "joint graph has no root link");
  if (roots.size() > 1)
    throw Error(ErrorCode::MultipleRoots,
                "links '" + links_[roots[0]].name + "' and '" + links_[roots[1]].name +
                    "' both lack a parent joint");
  root_ = roots.front();

  // Breadth-first from the root; anything unreached sits on a cycle.
  std::vector<bool> reached(links_.size(), false);
  std::deque<std::size_t> queue{root_};
  reached[root_] = true;
  while (!queue.empty()) {
    const std::size_t link = queue.front();
    queue.pop_front();
    for (std::size_t j = 0; j < joints_.size(); ++j) {
      if (joints_[j].parent != links_[link].name) continue;
      const std::size_t child = link_index(joints_[j].child);
      if (reached[child]) throw Error(ErrorCode::CyclicJointGraph, "cycle through '" + joints_[j].name + "'");
      reached[child] = true;
      topo_.push_back(j);
      queue.push_back(child);
    }
  }
  if (std::find(reached.begin(), reached.end(), false) != reached.end())
    throw Error(ErrorCode::CyclicJointGraph, "joint graph contains a cycle");

  for (std::size_t j = 0; j < joints_.size(); ++j)
    if (joints_[j].kind != JointKind::Fixed) dof_joints_.push_back(j);
}

std::size_t ObjectModel::link_index(std::string_view name) const {
  for (std::size_t i = 0; i < links_.size(); ++i)
    if (links_[i].name == name) return i;
  throw Error(ErrorCode::UnknownLink, "unknown link '" + std::string(name) + "'");
}

std::vector<std::size_t> ObjectModel::subtree_links(std::size_t joint) const {
  std::vector<std::size_t> out{link_index(joints_.at(joint).child)};
  for (std::size_t k = 0; k < out.size(); ++k) {
    for (const Joint& j : joints_)
      if (j.parent == links_[out[k]].name) out.push_back(link_index(j.child));
  }
  return out;
}

ObjectState closed_state(const ObjectModel& model) {
  ObjectState s;
  s.joint_positions.resize(model.n_dof());
  for (std::size_t d = 0; d < model.n_dof(); ++d) s.joint_positions[d] = model.dof(d).lower;
  return s;
}

// ---------------------------------------------------------------------------
// URDF subset

namespace {

const pt::ptree kEmpty;

Eigen::Vector3d parse_vec3(const std::string& text, const std::string& where) {
  std::istringstream in(text);
  Eigen::Vector3d v;
  if (!(in >> v.x() >> v.y() >> v.z()))
    throw Error(ErrorCode::MalformedXml, "expected three numbers in " + where + ": '" + text + "'");
  return v;
}

double parse_double(const std::string& text, const std::string& where) {
  std::istringstream in(text);
  double v = 0.0;
  if (!(in >> v)) throw Error(ErrorCode::MalformedXml, "expected a number in " + where);
  return v;
}

const pt::ptree& attrs(const pt::ptree& node) {
  auto it = node.find("<xmlattr>");
  return it == node.not_found() ? kEmpty : it->second;
}

std::string attr(const pt::ptree& node, const std::string& key, const std::string& where) {
  auto v = attrs(node).get_optional<std::string>(key);
  if (!v) throw Error(ErrorCode::MalformedXml, "missing attribute '" + key + "' on " + where);
  return *v;
}

// Child elements, skipping attributes and comments; rejects anything not in `allowed`.
std::vector<std::pair<std::string, const pt::ptree*>> children(
    const pt::ptree& node, std::initializer_list<std::string_view> allowed,
    const std::string& where) {
  std::vector<std::pair<std::string, const pt::ptree*>> out;
  for (const auto& [key, child] : node) {
    if (key == "<xmlattr>" || key == "<xmlcomment>") continue;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw Error(ErrorCode::UnsupportedElement, "element '" + key + "' in " + where);
    out.emplace_back(key, &child);
  }
  return out;
}

Pose parse_origin(const pt::ptree& node, const std::string& where) {
  Pose p;
  const auto& a = attrs(node);
  if (auto xyz = a.get_optional<std::string>("xyz")) p.xyz = parse_vec3(*xyz, where);
  if (auto rpy = a.get_optional<std::string>("rpy")) p.rpy = parse_vec3(*rpy, where);
  return p;
}

Link parse_link(const pt::ptree& node) {
  Link link;
  link.name = attr(node, "name", "link");
  const std::string where = "link '" + link.name + "'";
  bool has_box = false;
  for (const auto& [key, visual] : children(node, {"visual"}, where)) {
    for (const auto& [vkey, vnode] : children(*visual, {"origin", "geometry", "material"}, where)) {
      if (vkey == "origin") {
        link.visual_origin = parse_origin(*vnode, where);
      } else if (vkey == "geometry") {
        for (const auto& [gkey, gnode] : *vnode) {
          if (gkey == "<xmlattr>" || gkey == "<xmlcomment>") continue;
          if (gkey != "box")
            throw Error(ErrorCode::UnsupportedGeometry, "geometry '" + gkey + "' in " + where);
          link.half_extents = 0.5 * parse_vec3(attr(gnode, "size", where + " box"), where);
          has_box = true;
        }
      } else {
        for (const auto& [mkey, mnode] : children(*vnode, {"color"}, where)) {
          std::istringstream in(attr(*mnode, "rgba", where + " color"));
          double a = 1.0;
          if (!(in >> link.color.x() >> link.color.y() >> link.color.z()))
            throw Error(ErrorCode::MalformedXml, "bad rgba in " + where);
          in >> a;
        }
      }
    }
  }
  if (!has_box) throw Error(ErrorCode::UnsupportedGeometry, where + " has no box geometry");
  return link;
}

Joint parse_joint(const pt::ptree& node) {
  Joint joint;
  joint.name = attr(node, "name", "joint");
  const std::string where = "joint '" + joint.name + "'";
  const std::string type = attr(node, "type", where);
  if (type == "revolute") joint.kind = JointKind::Revolute;
  else if (type == "prismatic") joint.kind = JointKind::Prismatic;
  else if (type == "fixed") joint.kind = JointKind::Fixed;
  else throw Error(ErrorCode::UnsupportedElement, "joint type '" + type + "' in " + where);

  bool has_limit = false;
  for (const auto& [key, child] :
       children(node, {"origin", "axis", "limit", "parent", "child"}, where)) {
    if (key == "origin") {
      joint.origin = parse_origin(*child, where);
    } else if (key == "axis") {
      joint.axis = parse_vec3(attr(*child, "xyz", where + " axis"), where);
    } else if (key == "limit") {
      joint.lower = parse_double(attr(*child, "lower", where + " limit"), where);
      joint.upper = parse_double(attr(*child, "upper", where + " limit"), where);
      has_limit = true;
    } else if (key == "parent") {
      joint.parent = attr(*child, "link", where + " parent");
    } else {
      joint.child = attr(*child, "link", where + " child");
    }
  }
  if (joint.parent.empty() || joint.child.empty())
    throw Error(ErrorCode::MalformedXml, where + " needs parent and child");
  if (joint.kind == JointKind::Fixed) {
    joint.lower = joint.upper = 0.0;
  } else if (!has_limit) {
    throw Error(ErrorCode::MissingLimits, where + " is " + type + " but has no limit");
  }
  const double n = joint.axis.norm();
  if (n == 0.0 || !std::isfinite(n))
    throw Error(ErrorCode::InvalidModel, where + " has a zero axis");
  if (std::abs(n - 1.0) > 1e-9) joint.axis /= n;
  return joint;
}

std::string fmt_num(double v) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return out.str();
}

std::string fmt_vec(const Eigen::Vector3d& v) {
  return fmt_num(v.x()) + " " + fmt_num(v.y()) + " " + fmt_num(v.z());
}

}  // namespace

ObjectModel parse_urdf(std::string_view xml) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(xml)};
    pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw Error(ErrorCode::MalformedXml, e.what());
  }
  std::string name;
  const pt::ptree* robot = nullptr;
  for (const auto& [key, node] : tree) {
    if (key == "<xmlcomment>") continue;
    if (key != "robot") throw Error(ErrorCode::UnsupportedElement, "top-level element '" + key + "'");
    robot = &node;
  }
  if (!robot) throw Error(ErrorCode::MalformedXml, "no <robot> element");
  name = attrs(*robot).get<std::string>("name", "");

  std::vector<Link> links;
  std::vector<Joint> joints;
  for (const auto& [key, node] : children(*robot, {"link", "joint"}, "robot")) {
    if (key == "link") links.push_back(parse_link(*node));
    else joints.push_back(parse_joint(*node));
  }
  return ObjectModel(name, std::move(links), std::move(joints));
}

ObjectModel load_urdf(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_urdf(buf.str());
}

std::string write_urdf(const ObjectModel& model) {
  std::ostringstream out;
  out << "<?xml version=\"1.0\"?>\n<robot name=\"" << model.name() << "\">\n";
  for (const Link& l : model.links()) {
    out << "  <link name=\"" << l.name << "\">\n    <visual>\n"
        << "      <origin xyz=\"" << fmt_vec(l.visual_origin.xyz) << "\" rpy=\""
        << fmt_vec(l.visual_origin.rpy) << "\"/>\n"
        << "      <geometry><box size=\"" << fmt_vec(2.0 * l.half_extents) << "\"/></geometry>\n"
        << "      <material><color rgba=\"" << fmt_vec(l.color) << " 1\"/></material>\n"
        << "    </visual>\n  </link>\n";
  }
  for (const Joint& j : model.joints()) {
    out << "  <joint name=\"" << j.name << "\" type=\"" << to_string(j.kind) << "\">\n"
        << "    <origin xyz=\"" << fmt_vec(j.origin.xyz) << "\" rpy=\"" << fmt_vec(j.origin.rpy)
        << "\"/>\n"
        << "    <parent link=\"" << j.parent << "\"/>\n    <child link=\"" << j.child << "\"/>\n";
    if (j.kind != JointKind::Fixed) {
      out << "    <axis xyz=\"" << fmt_vec(j.axis) << "\"/>\n"
          << "    <limit lower=\"" << fmt_num(j.lower) << "\" upper=\"" << fmt_num(j.upper)
          << "\"/>\n";
    }
    out << "  </joint>\n";
  }
  out << "</robot>\n";
  return out.str();
}

// ---------------------------------------------------------------------------

std::vector<Eigen::Isometry3d> link_transforms(const ObjectModel& model, const ObjectState& state) {
  if (state.joint_positions.size() != model.n_dof())
    throw Error(ErrorCode::DimensionMismatch,
                "state has " + std::to_string(state.joint_positions.size()) +
                    " joint positions, model has " + std::to_string(model.n_dof()) + " dofs");

  std::vector<double> joint_value(model.joints().size(), 0.0);
  for (std::size_t d = 0; d < model.n_dof(); ++d)
    joint_value[model.dof_joint(d)] = state.joint_positions[d];

  const auto& p = state.root_pose;
  Pose root{{p[0], p[1], p[2]}, {p[3], p[4], p[5]}};

  std::vector<Eigen::Isometry3d> world(model.links().size(), Eigen::Isometry3d::Identity());
  world[model.root_index()] = root.to_isometry();
  for (std::size_t j : model.topological_joints()) {
    const Joint& joint = model.joints()[j];
    Eigen::Isometry3d motion = Eigen::Isometry3d::Identity();
    if (joint.kind == JointKind::Revolute)
      motion.linear() = Eigen::AngleAxisd(joint_value[j], joint.axis).toRotationMatrix();
    else if (joint.kind == JointKind::Prismatic)
      motion.translation() = joint_value[j] * joint.axis;
    world[model.link_index(joint.child)] =
        world[model.link_index(joint.parent)] * joint.origin.to_isometry() * motion;
  }

  if (state.detached_dof >= 0 && state.detached_lift != 0.0) {
    const auto dof = static_cast<std::size_t>(state.detached_dof);
    if (dof >= model.n_dof())
      throw Error(ErrorCode::DimensionMismatch, "detached dof out of range");
    Eigen::Isometry3d lift = Eigen::Isometry3d::Identity();
    lift.translation().z() = state.detached_lift;
    for (std::size_t l : model.subtree_links(model.dof_joint(dof))) world[l] = lift * world[l];
  }
  return world;
}

std::map<std::string, Eigen::Isometry3d> forward_kinematics(const ObjectModel& model,
                                                            const ObjectState& state) {
  auto world = link_transforms(model, state);
  std::map<std::string, Eigen::Isometry3d> out;
  for (std::size_t i = 0; i < world.size(); ++i) out.emplace(model.links()[i].name, world[i]);
  return out;
}

ObjectState apply_delta(const ObjectModel& model, const ObjectState& state,
                        std::span<const double> delta) {
  if (delta.size() != 6 + model.n_dof())
    throw Error(ErrorCode::DimensionMismatch,
                "delta has length " + std::to_string(delta.size()) + ", expected " +
                    std::to_string(6 + model.n_dof()));
  if (state.joint_positions.size() != model.n_dof())
    throw Error(ErrorCode::DimensionMismatch, "state does not match model");
  ObjectState next = state;
  for (std::size_t i = 0; i < 6; ++i) next.root_pose[i] += delta[i];
  for (std::size_t d = 0; d < model.n_dof(); ++d) {
    const Joint& j = model.dof(d);
    next.joint_positions[d] = std::clamp(state.joint_positions[d] + delta[6 + d], j.lower, j.upper);
  }
  return next;
}

}  // namespace verbgen
