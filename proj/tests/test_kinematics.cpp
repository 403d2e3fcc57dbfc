#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support/fixtures.hpp"
#include "verbgen/error.hpp"
#include "verbgen/kinematics.hpp"
#include "verbgen/procedural.hpp"

using namespace verbgen;

namespace {

constexpr const char* kMinimal = R"(<robot name="one"><link name="base"><visual><geometry><box size="1 1 1"/></geometry></visual></link></robot>)";

std::string two_links(const std::string& joint) {
  return R"(<robot name="t">
  <link name="a"><visual><geometry><box size="0.2 0.2 0.2"/></geometry></visual></link>
  <link name="b"><visual><geometry><box size="0.2 0.2 0.2"/></geometry></visual></link>)" +
         joint + "</robot>";
}

ErrorCode parse_error(const std::string& xml) {
  try {
    parse_urdf(xml);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidModel;
}

// Hand-written homogeneous matrices, independent of the Eigen geometry module.
using M4 = std::array<std::array<double, 4>, 4>;

M4 identity4() {
  M4 m{};
  for (int i = 0; i < 4; ++i) m[i][i] = 1.0;
  return m;
}

M4 mul(const M4& a, const M4& b) {
  M4 r{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

M4 translation(double x, double y, double z) {
  M4 m = identity4();
  m[0][3] = x;
  m[1][3] = y;
  m[2][3] = z;
  return m;
}

M4 rot_z(double t) {
  M4 m = identity4();
  m[0][0] = std::cos(t);
  m[0][1] = -std::sin(t);
  m[1][0] = std::sin(t);
  m[1][1] = std::cos(t);
  return m;
}

M4 rot_y(double t) {
  M4 m = identity4();
  m[0][0] = std::cos(t);
  m[0][2] = std::sin(t);
  m[2][0] = -std::sin(t);
  m[2][2] = std::cos(t);
  return m;
}

M4 rot_x(double t) {
  M4 m = identity4();
  m[1][1] = std::cos(t);
  m[1][2] = -std::sin(t);
  m[2][1] = std::sin(t);
  m[2][2] = std::cos(t);
  return m;
}

double max_diff(const Eigen::Isometry3d& got, const M4& want) {
  double d = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) d = std::max(d, std::abs(got.matrix()(i, j) - want[i][j]));
  return d;
}

ObjectModel one_joint(JointKind kind, Eigen::Vector3d axis, Pose origin, double lower, double upper) {
  Joint j{"j", kind, axis, origin, lower, upper, "a", "b"};
  return ObjectModel("m", {Link{"a"}, Link{"b"}}, {j});
}

}  // namespace

TEST_SUITE("kinematics") {

TEST_CASE("minimal document: one link, no joints") {
  const ObjectModel m = parse_urdf(kMinimal);
  CHECK(m.links().size() == 1);
  CHECK(m.joints().empty());
  CHECK(m.n_dof() == 0);
  CHECK(m.root() == "base");
  CHECK(m.links()[0].half_extents == Eigen::Vector3d::Constant(0.5));
}

TEST_CASE("cabinet fixture parses to the hand-built model") {
  const ObjectModel got = load_urdf(std::string(VERBGEN_FIXTURES) + "/cabinet.urdf");
  Link base{"base", {0.2, 0.3, 0.3}, {0.8, 0.6, 0.2}, Pose{{0, 0, 0.3}, {0, 0, 0}}};
  Link door{"door", {0.01, 0.3, 0.3}, {0.2, 0.4, 0.9}, Pose{{0, -0.3, 0.3}, {0, 0, 0}}};
  Joint hinge{"hinge", JointKind::Revolute, {0, 0, 1}, Pose{{0.21, 0.3, 0}, {0, 0, 0}}, 0.0, 1.57, "base", "door"};
  const ObjectModel want("cabinet", {base, door}, {hinge});
  CHECK(got == want);
  CHECK(got.n_dof() == 1);
  CHECK(got.dof(0).upper == 1.57);
}

TEST_CASE("structural errors are reported by code") {
  CHECK(parse_error("<robot><link") == ErrorCode::MalformedXml);
  CHECK(parse_error(two_links(R"(<joint name="j" type="fixed"><parent link="a"/><child link="zz"/></joint>)")) ==
        ErrorCode::UnknownLink);
  CHECK(parse_error(two_links("")) == ErrorCode::MultipleRoots);
  CHECK(parse_error(two_links(R"(<joint name="j" type="revolute"><parent link="a"/><child link="b"/></joint>)")) ==
        ErrorCode::MissingLimits);
  CHECK(parse_error(two_links(R"(<joint name="j" type="fixed"><parent link="a"/><child link="b"/></joint>
    <joint name="k" type="fixed"><parent link="b"/><child link="a"/></joint>)")) == ErrorCode::CyclicJointGraph);
  CHECK(parse_error(R"(<robot><link name="a"><visual><geometry><cylinder radius="1" length="1"/></geometry></visual></link></robot>)") ==
        ErrorCode::UnsupportedGeometry);
  CHECK(parse_error(R"(<robot><link name="a"><inertial/><visual><geometry><box size="1 1 1"/></geometry></visual></link></robot>)") ==
        ErrorCode::UnsupportedElement);
  CHECK(parse_error(two_links(R"(<joint name="j" type="continuous"><parent link="a"/><child link="b"/></joint>)")) ==
        ErrorCode::UnsupportedElement);
}

TEST_CASE("model invariants are enforced on construction") {
  CHECK_THROWS_AS(one_joint(JointKind::Revolute, {0, 0, 1}, {}, 1.0, 0.0), Error);
  CHECK_THROWS_AS(one_joint(JointKind::Revolute, {0, 0, 2}, {}, 0.0, 1.0), Error);
  CHECK_THROWS_AS(one_joint(JointKind::Fixed, {0, 0, 1}, {}, 0.0, 1.0), Error);
  CHECK_THROWS_AS(ObjectModel("m", {Link{"a", {0.0, 1.0, 1.0}}}, {}), Error);
  CHECK_THROWS_AS(ObjectModel("m", {Link{"a", {1, 1, 1}, {1.5, 0, 0}}}, {}), Error);
}

TEST_CASE("procedural generation is deterministic and category-shaped") {
  const ObjectModel a = generate_procedural("cabinet-hinged-door", 7);
  const ObjectModel b = generate_procedural("cabinet-hinged-door", 7);
  CHECK(a == b);
  CHECK_FALSE(a == generate_procedural("cabinet-hinged-door", 8));

  for (std::uint64_t seed : {0ull, 1ull, 99ull, 123456789ull}) {
    const ObjectModel d = generate_procedural("cabinet-drawer", seed);
    int prismatic = 0;
    for (const Joint& j : d.joints()) prismatic += j.kind == JointKind::Prismatic;
    CHECK(prismatic == 1);
    CHECK(d.n_dof() == 1);
  }

  const CategorySpec& spec = CategoryConfig::builtin().at("box-with-lid");
  const ObjectModel box = generate_procedural("box-with-lid", 3);
  REQUIRE(box.n_dof() == 1);
  CHECK(box.dof(0).kind == JointKind::Revolute);
  CHECK(box.dof(0).lower == 0.0);
  CHECK(box.dof(0).upper >= spec.joint_upper.lo);
  CHECK(box.dof(0).upper <= spec.joint_upper.hi);
  const Eigen::Vector3d body = 2.0 * box.links()[box.root_index()].half_extents;
  CHECK(body.x() >= spec.size_x.lo);
  CHECK(body.x() <= spec.size_x.hi);
  CHECK(body.z() >= spec.size_z.lo);
  CHECK(body.z() <= spec.size_z.hi);

  try {
    generate_procedural("spaceship", 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownCategory);
    CHECK(std::string(e.what()).find("spaceship") != std::string::npos);
  }
}

TEST_CASE("every built-in category yields distinct link colors and valid extents") {
  for (const std::string& cat : CategoryConfig::builtin().names()) {
    CAPTURE(cat);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const ObjectModel m = generate_procedural(cat, seed);
      REQUIRE(m.n_dof() >= 1);
      for (const Link& l : m.links()) {
        CHECK(l.half_extents.minCoeff() > 0.0);
        CHECK(2.0 * l.half_extents.maxCoeff() <= 1.0 + 1e-12);
      }
      for (std::size_t i = 0; i < m.links().size(); ++i)
        for (std::size_t k = i + 1; k < m.links().size(); ++k) CHECK(m.links()[i].color != m.links()[k].color);
    }
  }
}

TEST_CASE("forward kinematics: zero state gives the identity root") {
  const ObjectModel m = generate_procedural("safe-like", 2);
  const auto fk = forward_kinematics(m, closed_state(m));
  CHECK(fk.at(m.root()).matrix() == Eigen::Matrix4d::Identity());
}

TEST_CASE("forward kinematics matches hand-composed matrices") {
  const double pi = std::numbers::pi;
  SUBCASE("revolute about z by pi/2") {
    const ObjectModel m = one_joint(JointKind::Revolute, {0, 0, 1}, Pose{{0.5, 0, 0}, {0, 0, 0}}, 0.0, 2.0);
    ObjectState s = closed_state(m);
    s.joint_positions[0] = pi / 2;
    const auto fk = forward_kinematics(m, s);
    CHECK(max_diff(fk.at("b"), mul(translation(0.5, 0, 0), rot_z(pi / 2))) < 1e-12);
    // Child x axis now points along world y.
    CHECK(std::abs(fk.at("b").linear()(1, 0) - 1.0) < 1e-12);
  }
  SUBCASE("prismatic along x by 0.3") {
    const ObjectModel m = one_joint(JointKind::Prismatic, {1, 0, 0}, {}, 0.0, 1.0);
    ObjectState s = closed_state(m);
    s.joint_positions[0] = 0.3;
    CHECK(max_diff(forward_kinematics(m, s).at("b"), translation(0.3, 0, 0)) < 1e-15);
  }
  SUBCASE("root pose, rotated joint origin and a tilted axis compose in order") {
    const Pose origin{{0.1, -0.2, 0.3}, {0.3, -0.4, 0.5}};
    const Eigen::Vector3d axis = Eigen::Vector3d(0, 1, 0);
    const ObjectModel m = one_joint(JointKind::Revolute, axis, origin, -1.0, 1.0);
    ObjectState s = closed_state(m);
    s.root_pose = {1.0, 2.0, -0.5, 0.2, 0.1, -0.7};
    s.joint_positions[0] = 0.6;
    const M4 root = mul(translation(1.0, 2.0, -0.5), mul(rot_z(-0.7), mul(rot_y(0.1), rot_x(0.2))));
    const M4 joint = mul(translation(0.1, -0.2, 0.3), mul(rot_z(0.5), mul(rot_y(-0.4), rot_x(0.3))));
    const auto fk = forward_kinematics(m, s);
    CHECK(max_diff(fk.at("a"), root) < 1e-12);
    CHECK(max_diff(fk.at("b"), mul(root, mul(joint, rot_y(0.6)))) < 1e-12);
  }
}

TEST_CASE("forward kinematics rejects a state of the wrong size and is bitwise deterministic") {
  const ObjectModel m = generate_procedural("laptop-like", 4);
  ObjectState s = closed_state(m);
  s.joint_positions.push_back(0.0);
  CHECK_THROWS_AS(forward_kinematics(m, s), Error);
  ObjectState t = closed_state(m);
  t.root_pose = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  t.joint_positions[0] = 0.7;
  const auto a = link_transforms(m, t), b = link_transforms(m, t);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].matrix() == b[i].matrix());
}

TEST_CASE("fixed chains are rigid and ignore the joint vector") {
  Joint j1{"j1", JointKind::Fixed, {1, 0, 0}, Pose{{0, 0, 0.5}, {0, 0, 0.3}}, 0, 0, "a", "b"};
  Joint j2{"j2", JointKind::Fixed, {1, 0, 0}, Pose{{0.2, 0, 0}, {0.1, 0, 0}}, 0, 0, "b", "c"};
  const ObjectModel m("chain", {Link{"a"}, Link{"b"}, Link{"c"}}, {j1, j2});
  CHECK(m.n_dof() == 0);
  ObjectState s = closed_state(m);
  s.root_pose = {0.5, 0, 0, 0, 0, 0.2};
  const auto fk = forward_kinematics(m, s);
  const M4 want = mul(mul(translation(0.5, 0, 0), rot_z(0.2)),
                      mul(mul(translation(0, 0, 0.5), rot_z(0.3)), mul(translation(0.2, 0, 0), rot_x(0.1))));
  CHECK(max_diff(fk.at("c"), want) < 1e-12);
}

TEST_CASE("apply_delta adds, clamps joints and checks length") {
  const ObjectModel m = one_joint(JointKind::Revolute, {0, 0, 1}, {}, 0.0, 1.0);
  ObjectState s = closed_state(m);
  s.joint_positions[0] = 0.9;
  CHECK(apply_delta(m, s, std::vector<double>(7, 0.0)) == s);

  std::vector<double> d(7, 0.0);
  d[6] = 0.4;
  CHECK(apply_delta(m, s, d).joint_positions[0] == 1.0);
  d[6] = -5.0;
  CHECK(apply_delta(m, s, d).joint_positions[0] == 0.0);

  std::vector<double> dx(7, 0.0);
  dx[0] = -0.10;
  ObjectState t = closed_state(m);
  for (int i = 0; i < 4; ++i) t = apply_delta(m, t, dx);
  CHECK(t.root_pose[0] == doctest::Approx(-0.40).epsilon(1e-15));

  ObjectState gone = s;
  gone.present = false;
  CHECK_FALSE(apply_delta(m, gone, d).present);
  CHECK_THROWS_AS(apply_delta(m, s, std::vector<double>(6, 0.0)), Error);
}

TEST_CASE("apply_delta keeps every joint within limits under random deltas") {
  const ObjectModel m = generate_procedural("cabinet-drawer", 11);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 0.5);
  ObjectState s = closed_state(m);
  for (int step = 0; step < 500; ++step) {
    std::vector<double> d(6 + m.n_dof());
    for (double& v : d) v = n(rng);
    s = apply_delta(m, s, d);
    for (std::size_t k = 0; k < m.n_dof(); ++k) {
      REQUIRE(s.joint_positions[k] >= m.dof(k).lower);
      REQUIRE(s.joint_positions[k] <= m.dof(k).upper);
    }
  }
}

TEST_CASE("URDF write then parse reproduces the model") {
  for (const std::string& cat : CategoryConfig::builtin().names()) {
    const ObjectModel m = generate_procedural(cat, 31);
    CHECK(parse_urdf(write_urdf(m)) == m);
  }
  const ObjectModel cab = load_urdf(std::string(VERBGEN_FIXTURES) + "/cabinet.urdf");
  CHECK(parse_urdf(write_urdf(cab)) == cab);
}

}  // TEST_SUITE
