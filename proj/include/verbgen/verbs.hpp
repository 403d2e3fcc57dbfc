#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "verbgen/kinematics.hpp"
#include "verbgen/render.hpp"

namespace verbgen {

/// Class index order is part of the model file format; do not reorder.
enum class Verb : int {
  Push = 0,
  Pull,
  Raise,
  Lower,
  TranslateLeft,
  TranslateRight,
  RemoveWhole,
  RemovePart,
  InsertPart,
  Open,
  Close,
  Roll,
  Turn,
  Flip,
  None,
};

inline constexpr int kNumVerbs = 15;
inline constexpr int kTrajectoryLength = 21;

std::string_view to_string(Verb verb);
Verb verb_from_string(std::string_view name);
std::optional<Verb> try_verb_from_string(std::string_view name);
constexpr int class_index(Verb v) { return static_cast<int>(v); }
Verb verb_from_index(int index);
const std::array<Verb, kNumVerbs>& all_verbs();
/// "Push, Pull, ..." for error messages and CLI help.
std::string verb_list();

bool needs_joint(Verb verb);

/// Degree-of-freedom groups a trajectory can move.
enum class DofGroup { X, Y, Z, Roll, Pitch, Yaw, Joint, DetachedPart, Presence };

/// Magnitudes of the canonical motions.
struct VerbConventions {
  /// Total root displacement of the six translation verbs over the trajectory (meters).
  double translation_total = 1.0;
  /// Each generated translation trajectory scales its total by a factor drawn
  /// from the trajectory seed in [1 - spread, 1 + spread]. Canonical steps use
  /// the nominal total.
  double translation_spread = 0.4;
  double roll_total = 1.5707963267948966;
  double turn_total = 1.5707963267948966;
  double flip_total = 4.71238898038469;
  /// Which non-fixed joint part verbs act on.
  std::size_t dof = 0;
};

struct Trajectory {
  std::string model_id;
  std::string category;
  Verb verb = Verb::None;
  std::vector<ObjectState> states;
  std::uint64_t seed = 0;
  /// For None: the two verbs that were mixed.
  std::vector<Verb> components;

  std::vector<ImageRGB> render_frames(const ObjectModel& model, const CameraConfig& camera,
                                      ImageSize size) const;
};

/// Per-timestep change of a canonical single-verb motion, laid out like a
/// planner delta (6 pose components then one per dof). Only defined for verbs
/// that move the pose or a joint.
std::vector<double> canonical_step(const ObjectModel& model, Verb verb, int steps,
                                   const VerbConventions& conv = {});
/// Pose/joint dimension moved by a canonical verb and its sign, if any.
std::optional<std::pair<std::size_t, int>> canonical_dimension(const ObjectModel& model, Verb verb,
                                                               const VerbConventions& conv = {});

/// Frame 0 of the canonical trajectory for `verb` (the state planning starts from).
ObjectState canonical_initiation(const ObjectModel& model, Verb verb, const VerbConventions& conv = {});

Trajectory make_verb_trajectory(const ObjectModel& model, Verb verb, std::uint64_t seed,
                                const VerbConventions& conv = {});
Trajectory make_none_trajectory(const ObjectModel& model, std::uint64_t seed,
                                const VerbConventions& conv = {});
/// Dispatches to the two generators above.
Trajectory make_trajectory(const ObjectModel& model, Verb verb, std::uint64_t seed,
                           const VerbConventions& conv = {});

/// Groups that differ between two consecutive states.
std::vector<DofGroup> changed_groups(const ObjectState& a, const ObjectState& b);

/// Evenly spaced indices over [0, 20] including both ends.
std::vector<int> sample_indices(int count);
std::vector<ImageRGB> sample_frames(std::span<const ImageRGB> frames, int count);

}  // namespace verbgen
