#pragma once

// Verb-conditioned trajectory search. A single per-timestep change of the
// (6 + n_dof) state vector is applied T-1 times from the initiation state;
// CMA-ES minimizes the classifier's cross-entropy against the target verb
// over the rendered frames.

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "verbgen/cmaes.hpp"
#include "verbgen/kinematics.hpp"
#include "verbgen/nn/cnn.hpp"
#include "verbgen/render.hpp"
#include "verbgen/verbs.hpp"

namespace verbgen {

inline constexpr int kTrajectorySchemaVersion = 1;

struct PlanRequest {
  const ObjectModel* model = nullptr;
  ObjectState initiation;
  Verb verb = Verb::Open;
  const nn::CnnModel* classifier = nullptr;
  CameraConfig camera;
  int frames = 5;
  /// dimension and bounds are filled in from the model.
  CmaConfig cma;

  /// Throws Error(InvalidArgument / ShapeMismatch).
  void validate() const;
};

struct PlanResult {
  Verb verb = Verb::Open;
  std::vector<double> delta;
  std::vector<ObjectState> states;
  std::vector<ImageRGB> frames;
  double final_loss = 0.0;
  /// Loss of the zero delta (the initial CMA-ES mean).
  double zero_loss = 0.0;
  std::array<double, kNumVerbs> probabilities{};
  std::vector<double> history;
};

/// Keeps the largest-magnitude component (lowest index on ties), zeroes the rest.
std::vector<double> mask_max_dim(std::span<const double> delta);

/// states[0] = initiation, states[t+1] = apply_delta(states[t], delta).
std::vector<ObjectState> rollout(const ObjectModel& model, const ObjectState& initiation,
                                 std::span<const double> delta, int frames);

double score_trajectory(const PlanRequest& request, std::span<const double> delta);
/// Scores a generation with one batched classifier pass. Results are in input order.
std::vector<double> score_trajectories(const PlanRequest& request, std::span<const std::vector<double>> deltas);

/// `on_generation` receives CMA-ES progress (see cma_trace_line).
PlanResult optimize_trajectory(const PlanRequest& request, const CmaObserver& on_generation = {});

nlohmann::json trajectory_to_json(const PlanResult& result, const ObjectModel& model);
void export_trajectory(const PlanResult& result, const ObjectModel& model, const std::filesystem::path& path);

struct TrajectoryFile {
  ObjectModel model;
  Verb verb = Verb::Open;
  int frames = 0;
  std::vector<double> delta;
  std::vector<ObjectState> states;
  std::array<double, kNumVerbs> probabilities{};
  double final_loss = 0.0;
};

/// Throws Error(InvalidArgument) naming the first violation.
void validate_trajectory_json(const nlohmann::json& doc);
TrajectoryFile trajectory_from_json(const nlohmann::json& doc);
TrajectoryFile load_trajectory(const std::filesystem::path& path);

}  // namespace verbgen
