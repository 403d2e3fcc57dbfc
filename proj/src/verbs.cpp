#include "verbgen/verbs.hpp"

#include <algorithm>
#include <cmath>

#include "verbgen/error.hpp"
#include "verbgen/seed.hpp"

namespace verbgen {

namespace {

constexpr std::array<Verb, kNumVerbs> kAllVerbs{
    Verb::Push,       Verb::Pull,      Verb::Raise,      Verb::Lower, Verb::TranslateLeft,
    Verb::TranslateRight, Verb::RemoveWhole, Verb::RemovePart, Verb::InsertPart, Verb::Open,
    Verb::Close,      Verb::Roll,      Verb::Turn,       Verb::Flip,  Verb::None};

constexpr std::array<std::string_view, kNumVerbs> kNames{
    "Push", "Pull", "Raise", "Lower", "TranslateLeft", "TranslateRight", "RemoveWhole", "RemovePart",
    "InsertPart", "Open", "Close", "Roll", "Turn", "Flip", "None"};

constexpr int kSteps = kTrajectoryLength - 1;

// Radius of a sphere around the root origin that holds the object in both
// the closed and the fully open configuration.
double bounding_radius(const ObjectModel& model) {
  double r = 0.0;
  for (int open = 0; open < 2; ++open) {
    ObjectState s = closed_state(model);
    if (open)
      for (std::size_t d = 0; d < model.n_dof(); ++d) s.joint_positions[d] = model.dof(d).upper;
    const auto world = link_transforms(model, s);
    for (std::size_t i = 0; i < world.size(); ++i) {
      const Link& l = model.links()[i];
      const Eigen::Isometry3d t = world[i] * l.visual_origin.to_isometry();
      for (int c = 0; c < 8; ++c) {
        const Eigen::Vector3d local((c & 1) ? l.half_extents.x() : -l.half_extents.x(),
                                    (c & 2) ? l.half_extents.y() : -l.half_extents.y(),
                                    (c & 4) ? l.half_extents.z() : -l.half_extents.z());
        r = std::max(r, (t * local).norm());
      }
    }
  }
  return r;
}

// Distance that carries the object (or a part of it) clear of the default
// camera's view volume.
double exit_distance(const ObjectModel& model) { return 2.0 + 1.5 * bounding_radius(model); }

void require_joint(const ObjectModel& model, Verb verb, const VerbConventions& conv) {
  if (conv.dof >= model.n_dof())
    throw Error(ErrorCode::VerbNotApplicable,
                std::string(to_string(verb)) + " needs a movable joint; model '" + model.name() +
                    "' has " + std::to_string(model.n_dof()));
}

// Pose/joint change applied over the whole trajectory (6 + n components).
std::vector<double> total_change(const ObjectModel& model, Verb verb, const VerbConventions& conv) {
  std::vector<double> d(6 + model.n_dof(), 0.0);
  const double t = conv.translation_total;
  switch (verb) {
    case Verb::Push: d[0] = -t; break;
    case Verb::Pull: d[0] = t; break;
    case Verb::Raise: d[2] = t; break;
    case Verb::Lower: d[2] = -t; break;
    case Verb::TranslateLeft: d[1] = t; break;
    case Verb::TranslateRight: d[1] = -t; break;
    case Verb::Roll: d[3] = conv.roll_total; break;
    case Verb::Flip: d[4] = conv.flip_total; break;
    case Verb::Turn: d[5] = conv.turn_total; break;
    case Verb::Open:
    case Verb::Close: {
      require_joint(model, verb, conv);
      const Joint& j = model.dof(conv.dof);
      d[6 + conv.dof] = (verb == Verb::Open ? 1.0 : -1.0) * (j.upper - j.lower);
      break;
    }
    default:
      throw Error(ErrorCode::InvalidArgument,
                  std::string(to_string(verb)) + " is not a pose or joint motion");
  }
  return d;
}

DofGroup group_of(Verb verb) {
  switch (verb) {
    case Verb::Push:
    case Verb::Pull: return DofGroup::X;
    case Verb::TranslateLeft:
    case Verb::TranslateRight: return DofGroup::Y;
    case Verb::Raise:
    case Verb::Lower: return DofGroup::Z;
    case Verb::Roll: return DofGroup::Roll;
    case Verb::Flip: return DofGroup::Pitch;
    case Verb::Turn: return DofGroup::Yaw;
    case Verb::Open:
    case Verb::Close: return DofGroup::Joint;
    case Verb::RemovePart:
    case Verb::InsertPart: return DofGroup::DetachedPart;
    default: return DofGroup::Presence;
  }
}

// Linear interpolation from `start` by `change` over the 20 steps.
std::vector<ObjectState> interpolate(const ObjectModel& model, const ObjectState& start,
                                     const std::vector<double>& change) {
  std::vector<ObjectState> states(kTrajectoryLength, start);
  for (int k = 0; k <= kSteps; ++k) {
    const double f = static_cast<double>(k) / kSteps;
    ObjectState& s = states[static_cast<std::size_t>(k)];
    for (std::size_t i = 0; i < 6; ++i) s.root_pose[i] = start.root_pose[i] + change[i] * f;
    for (std::size_t d = 0; d < model.n_dof(); ++d) {
      const Joint& j = model.dof(d);
      s.joint_positions[d] = std::clamp(start.joint_positions[d] + change[6 + d] * f, j.lower, j.upper);
    }
  }
  return states;
}

}  // namespace

std::string_view to_string(Verb verb) { return kNames.at(static_cast<std::size_t>(verb)); }

std::optional<Verb> try_verb_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return kAllVerbs[i];
  return std::nullopt;
}

Verb verb_from_string(std::string_view name) {
  if (auto v = try_verb_from_string(name)) return *v;
  throw Error(ErrorCode::UnknownVerb, "'" + std::string(name) + "'; valid verbs: " + verb_list());
}

Verb verb_from_index(int index) {
  if (index < 0 || index >= kNumVerbs)
    throw Error(ErrorCode::UnknownVerb, "class index " + std::to_string(index));
  return kAllVerbs[static_cast<std::size_t>(index)];
}

const std::array<Verb, kNumVerbs>& all_verbs() { return kAllVerbs; }

std::string verb_list() {
  std::string out;
  for (auto n : kNames) out += (out.empty() ? "" : ", ") + std::string(n);
  return out;
}

bool needs_joint(Verb verb) {
  return verb == Verb::Open || verb == Verb::Close || verb == Verb::RemovePart ||
         verb == Verb::InsertPart;
}

std::vector<double> canonical_step(const ObjectModel& model, Verb verb, int steps,
                                   const VerbConventions& conv) {
  if (steps <= 0) throw Error(ErrorCode::InvalidArgument, "steps must be positive");
  auto d = total_change(model, verb, conv);
  for (double& v : d) v /= steps;
  return d;
}

std::optional<std::pair<std::size_t, int>> canonical_dimension(const ObjectModel& model, Verb verb,
                                                               const VerbConventions& conv) {
  if (verb == Verb::None || verb == Verb::RemoveWhole || verb == Verb::RemovePart ||
      verb == Verb::InsertPart)
    return std::nullopt;
  const auto d = total_change(model, verb, conv);
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] != 0.0) return std::make_pair(i, d[i] > 0.0 ? 1 : -1);
  return std::nullopt;
}

ObjectState canonical_initiation(const ObjectModel& model, Verb verb, const VerbConventions& conv) {
  return make_trajectory(model, verb, 0, conv).states.front();
}

Trajectory make_verb_trajectory(const ObjectModel& model, Verb verb, std::uint64_t seed,
                                const VerbConventions& conv) {
  if (verb == Verb::None)
    throw Error(ErrorCode::InvalidArgument, "None trajectories come from make_none_trajectory");
  if (needs_joint(verb)) require_joint(model, verb, conv);

  Trajectory traj;
  traj.model_id = model.name();
  traj.verb = verb;
  traj.seed = seed;
  const ObjectState closed = closed_state(model);

  switch (verb) {
    case Verb::RemoveWhole: {
      // Leaves the view by frame 19; the last step only drops presence so
      // each step still moves a single group.
      const double exit = exit_distance(model);
      traj.states.assign(kTrajectoryLength, closed);
      for (int k = 0; k < kSteps; ++k)
        traj.states[static_cast<std::size_t>(k)].root_pose[1] = exit * k / (kSteps - 1);
      traj.states.back().root_pose[1] = exit;
      traj.states.back().present = false;
      break;
    }
    case Verb::RemovePart:
    case Verb::InsertPart: {
      const double lift = exit_distance(model);
      traj.states.assign(kTrajectoryLength, closed);
      for (int k = 0; k <= kSteps; ++k) {
        ObjectState& s = traj.states[static_cast<std::size_t>(k)];
        s.detached_dof = static_cast<int>(conv.dof);
        s.detached_lift = lift * static_cast<double>(k) / kSteps;
      }
      if (verb == Verb::InsertPart) std::reverse(traj.states.begin(), traj.states.end());
      break;
    }
    case Verb::Close: {
      // Exact time-reverse of Open.
      traj.states = interpolate(model, closed, total_change(model, Verb::Open, conv));
      std::reverse(traj.states.begin(), traj.states.end());
      break;
    }
    default: {
      auto change = total_change(model, verb, conv);
      if (group_of(verb) == DofGroup::X || group_of(verb) == DofGroup::Y || group_of(verb) == DofGroup::Z) {
        const double u = static_cast<double>(mix_seed(seed ^ (0x9e37ULL * (class_index(verb) + 1))) >> 11) * 0x1p-53;
        const double scale = 1.0 + conv.translation_spread * (2.0 * u - 1.0);
        for (double& v : change) v *= scale;
      }
      traj.states = interpolate(model, closed, change);
    }
  }
  return traj;
}

Trajectory make_none_trajectory(const ObjectModel& model, std::uint64_t seed,
                                const VerbConventions& conv) {
  std::vector<Verb> pool{Verb::Push, Verb::Pull, Verb::Raise, Verb::Lower, Verb::TranslateLeft,
                         Verb::TranslateRight, Verb::Roll, Verb::Turn, Verb::Flip};
  if (conv.dof < model.n_dof()) {
    pool.push_back(Verb::Open);
    pool.push_back(Verb::Close);
  }
  const Verb first = pool[mix_seed(seed) % pool.size()];
  std::vector<Verb> rest;
  for (Verb v : pool)
    if (group_of(v) != group_of(first)) rest.push_back(v);
  const Verb second = rest[mix_seed(seed ^ 0x5bd1e995ULL) % rest.size()];

  ObjectState start = closed_state(model);
  std::vector<double> change(6 + model.n_dof(), 0.0);
  for (Verb v : {first, second}) {
    const auto d = total_change(model, v, conv);
    for (std::size_t i = 0; i < d.size(); ++i) change[i] += d[i];
    if (v == Verb::Close) start.joint_positions[conv.dof] = model.dof(conv.dof).upper;
  }

  Trajectory traj;
  traj.model_id = model.name();
  traj.verb = Verb::None;
  traj.seed = seed;
  traj.components = {first, second};
  traj.states = interpolate(model, start, change);
  return traj;
}

Trajectory make_trajectory(const ObjectModel& model, Verb verb, std::uint64_t seed,
                           const VerbConventions& conv) {
  return verb == Verb::None ? make_none_trajectory(model, seed, conv)
                            : make_verb_trajectory(model, verb, seed, conv);
}

std::vector<ImageRGB> Trajectory::render_frames(const ObjectModel& model, const CameraConfig& camera,
                                                ImageSize size) const {
  return render_trajectory(model, states, camera, size);
}

std::vector<DofGroup> changed_groups(const ObjectState& a, const ObjectState& b) {
  constexpr std::array<DofGroup, 6> pose{DofGroup::X,    DofGroup::Y,     DofGroup::Z,
                                         DofGroup::Roll, DofGroup::Pitch, DofGroup::Yaw};
  std::vector<DofGroup> out;
  for (std::size_t i = 0; i < 6; ++i)
    if (a.root_pose[i] != b.root_pose[i]) out.push_back(pose[i]);
  if (a.joint_positions != b.joint_positions) out.push_back(DofGroup::Joint);
  if (a.detached_dof != b.detached_dof || a.detached_lift != b.detached_lift)
    out.push_back(DofGroup::DetachedPart);
  if (a.present != b.present) out.push_back(DofGroup::Presence);
  return out;
}

std::vector<int> sample_indices(int count) {
  if (count < 2 || count > kTrajectoryLength)
    throw Error(ErrorCode::InvalidArgument,
                "frame count " + std::to_string(count) + " outside [2, 21]");
  std::vector<int> idx(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) idx[static_cast<std::size_t>(i)] = (i * kSteps * 2 + (count - 1)) / (2 * (count - 1));
  return idx;
}

std::vector<ImageRGB> sample_frames(std::span<const ImageRGB> frames, int count) {
  if (frames.size() != kTrajectoryLength)
    throw Error(ErrorCode::InvalidArgument,
                "expected 21 frames, got " + std::to_string(frames.size()));
  std::vector<ImageRGB> out;
  for (int i : sample_indices(count)) out.push_back(frames[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace verbgen
