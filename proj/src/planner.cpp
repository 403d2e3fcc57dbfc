#include "verbgen/planner.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "verbgen/error.hpp"

namespace verbgen {

void PlanRequest::validate() const {
  if (model == nullptr || classifier == nullptr)
    throw Error(ErrorCode::InvalidArgument, "plan request needs an object model and a classifier");
  if (verb == Verb::None) throw Error(ErrorCode::InvalidArgument, "cannot plan for None");
  if (frames < 2) throw Error(ErrorCode::InvalidArgument, "a trajectory needs at least 2 frames");
  const nn::Architecture& a = classifier->arch;
  if (a.frames != frames)
    throw Error(ErrorCode::ShapeMismatch, "classifier expects " + std::to_string(a.frames) + " frames, request has " +
                                              std::to_string(frames));
  a.validate();
  if (classifier->params.size() != nn::param_layout(a).total)
    throw Error(ErrorCode::ShapeMismatch, "classifier parameters do not match its architecture");
  if (initiation.joint_positions.size() != model->n_dof())
    throw Error(ErrorCode::DimensionMismatch, "initiation state does not match the object model");
  camera.validate();
}

std::vector<double> mask_max_dim(std::span<const double> delta) {
  if (delta.empty()) throw Error(ErrorCode::InvalidArgument, "cannot mask an empty delta");
  std::size_t best = 0;
  for (std::size_t i = 1; i < delta.size(); ++i)
    if (std::abs(delta[i]) > std::abs(delta[best])) best = i;
  std::vector<double> out(delta.size(), 0.0);
  out[best] = delta[best];
  return out;
}

std::vector<ObjectState> rollout(const ObjectModel& model, const ObjectState& initiation,
                                 std::span<const double> delta, int frames) {
  if (delta.size() != 6 + model.n_dof())
    throw Error(ErrorCode::DimensionMismatch, "delta has " + std::to_string(delta.size()) + " components, expected " +
                                                  std::to_string(6 + model.n_dof()));
  if (frames < 1) throw Error(ErrorCode::InvalidArgument, "frames must be positive");
  std::vector<ObjectState> states{initiation};
  states.reserve(static_cast<std::size_t>(frames));
  for (int t = 1; t < frames; ++t) states.push_back(apply_delta(model, states.back(), delta));
  return states;
}

namespace {

ImageSize input_size(const PlanRequest& r) { return {r.classifier->arch.width, r.classifier->arch.height}; }

/// Log-probabilities for each delta (already masked), one batched forward.
std::vector<std::array<double, kNumVerbs>> classify(const PlanRequest& r, std::span<const std::vector<double>> deltas) {
  const ImageSize size = input_size(r);
  const ImageRGB first = render(*r.model, r.initiation, r.camera, size);
  std::vector<std::vector<ImageRGB>> batch(deltas.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(deltas.size()); ++i) {
    const auto states = rollout(*r.model, r.initiation, deltas[static_cast<std::size_t>(i)], r.frames);
    auto& frames = batch[static_cast<std::size_t>(i)];
    frames.push_back(first);
    for (std::size_t t = 1; t < states.size(); ++t) frames.push_back(render(*r.model, states[t], r.camera, size));
  }
  const nn::Tensor log_probs = nn::forward_log(*r.classifier, nn::input_tensor(batch));
  std::vector<std::array<double, kNumVerbs>> out(deltas.size());
  for (std::size_t i = 0; i < deltas.size(); ++i)
    std::copy_n(log_probs.data.begin() + static_cast<std::ptrdiff_t>(i * kNumVerbs), kNumVerbs, out[i].begin());
  return out;
}

// Cross-entropy against the one-hot target, taken from the log-probabilities
// directly. Clamping p would flatten every confidently wrong candidate to the
// same value, and CMA-ES only sees the ranking.
double loss_of(const std::array<double, kNumVerbs>& log_p, Verb verb) {
  return -log_p[static_cast<std::size_t>(class_index(verb))];
}

}  // namespace

std::vector<double> score_trajectories(const PlanRequest& request, std::span<const std::vector<double>> deltas) {
  request.validate();
  std::vector<std::vector<double>> masked;
  masked.reserve(deltas.size());
  for (const auto& d : deltas) {
    if (d.size() != 6 + request.model->n_dof()) throw Error(ErrorCode::DimensionMismatch, "delta has the wrong length");
    masked.push_back(mask_max_dim(d));
  }
  const auto probs = classify(request, masked);
  std::vector<double> loss(deltas.size());
  for (std::size_t i = 0; i < loss.size(); ++i) loss[i] = loss_of(probs[i], request.verb);
  return loss;
}

double score_trajectory(const PlanRequest& request, std::span<const double> delta) {
  const std::vector<std::vector<double>> one{std::vector<double>(delta.begin(), delta.end())};
  return score_trajectories(request, one).front();
}

PlanResult optimize_trajectory(const PlanRequest& request, const CmaObserver& on_generation) {
  request.validate();
  const ObjectModel& model = *request.model;
  const std::size_t d = 6 + model.n_dof();
  constexpr double inf = std::numeric_limits<double>::infinity();

  CmaConfig cma = request.cma;
  cma.dimension = static_cast<int>(d);
  cma.initial_mean.assign(d, 0.0);
  cma.lower.assign(d, -inf);
  cma.upper.assign(d, inf);
  for (std::size_t j = 0; j < model.n_dof(); ++j) {
    const double range = model.dof(j).upper - model.dof(j).lower;
    cma.lower[6 + j] = -range;
    cma.upper[6 + j] = range;
  }

  const BatchObjective objective = [&](const std::vector<Eigen::VectorXd>& xs) {
    std::vector<std::vector<double>> deltas;
    deltas.reserve(xs.size());
    for (const auto& x : xs) deltas.emplace_back(x.data(), x.data() + x.size());
    return score_trajectories(request, deltas);
  };
  const CmaResult best = cma_minimize(objective, cma, on_generation);

  PlanResult r;
  r.verb = request.verb;
  r.delta = mask_max_dim(std::vector<double>(best.best.data(), best.best.data() + best.best.size()));
  r.states = rollout(model, request.initiation, r.delta, request.frames);
  r.frames = render_trajectory(model, r.states, request.camera, input_size(request));
  const std::vector<std::vector<double>> one{r.delta};
  const auto log_p = classify(request, one).front();
  for (std::size_t k = 0; k < kNumVerbs; ++k) r.probabilities[k] = std::exp(log_p[k]);
  r.final_loss = best.best_fitness;
  r.zero_loss = best.history.front();
  r.history = best.history;
  return r;
}

namespace {

constexpr const char* kSchemaName = "verbgen-trajectory";

nlohmann::json state_json(const ObjectState& s) {
  return {{"root_pose", s.root_pose}, {"joint_positions", s.joint_positions}};
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, "trajectory file: " + what);
}

bool is_number_array(const nlohmann::json& j, std::size_t n) {
  if (!j.is_array() || j.size() != n) return false;
  for (const auto& v : j)
    if (!v.is_number()) return false;
  return true;
}

}  // namespace

nlohmann::json trajectory_to_json(const PlanResult& result, const ObjectModel& model) {
  nlohmann::json states = nlohmann::json::array();
  for (const auto& s : result.states) states.push_back(state_json(s));
  nlohmann::json probs = nlohmann::json::object();
  for (Verb v : all_verbs()) probs[std::string(to_string(v))] = result.probabilities[static_cast<std::size_t>(class_index(v))];
  return {{"schema", kSchemaName},
          {"schema_version", kTrajectorySchemaVersion},
          {"verb", std::string(to_string(result.verb))},
          {"T", static_cast<int>(result.states.size())},
          {"delta", result.delta},
          {"states", states},
          {"probabilities", probs},
          {"final_loss", result.final_loss},
          {"object", {{"name", model.name()}, {"urdf", write_urdf(model)}}}};
}

void export_trajectory(const PlanResult& result, const ObjectModel& model, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path.string());
  f << trajectory_to_json(result, model).dump(2) << '\n';
  if (!f) throw Error(ErrorCode::Io, "short write to " + path.string());
}

void validate_trajectory_json(const nlohmann::json& doc) {
  require(doc.is_object(), "top level must be an object");
  for (const char* key : {"schema", "schema_version", "verb", "T", "delta", "states", "probabilities", "final_loss", "object"})
    require(doc.contains(key), std::string("missing \"") + key + "\"");
  require(doc["schema"] == kSchemaName, "unknown schema");
  require(doc["schema_version"].is_number_integer(), "schema_version must be an integer");
  require(doc["schema_version"].get<int>() == kTrajectorySchemaVersion,
          "unsupported schema_version " + doc["schema_version"].dump());
  require(doc["verb"].is_string() && try_verb_from_string(doc["verb"].get<std::string>()).has_value(), "unknown verb");
  require(doc["T"].is_number_integer() && doc["T"].get<int>() >= 1, "T must be a positive integer");
  require(doc["object"].is_object() && doc["object"].contains("urdf") && doc["object"]["urdf"].is_string(),
          "object.urdf must be a string");
  const auto& delta = doc["delta"];
  require(delta.is_array() && delta.size() >= 6 && is_number_array(delta, delta.size()), "delta must be >= 6 numbers");
  int nonzero = 0;
  for (const auto& v : delta) nonzero += v.get<double>() != 0.0;
  require(nonzero <= 1, "delta must have at most one non-zero component");
  const auto& states = doc["states"];
  require(states.is_array() && states.size() == doc["T"].get<std::size_t>(), "states must have T entries");
  for (const auto& s : states) {
    require(s.is_object() && is_number_array(s.value("root_pose", nlohmann::json()), 6), "root_pose must be 6 numbers");
    require(is_number_array(s.value("joint_positions", nlohmann::json()), delta.size() - 6),
            "joint_positions must match the delta length");
  }
  const auto& probs = doc["probabilities"];
  require(probs.is_object() && probs.size() == kNumVerbs, "probabilities must list every verb");
  for (Verb v : all_verbs()) {
    const std::string key(to_string(v));
    require(probs.contains(key) && probs[key].is_number(), "probability for " + key + " missing");
  }
  require(doc["final_loss"].is_number(), "final_loss must be a number");
}

TrajectoryFile trajectory_from_json(const nlohmann::json& doc) {
  validate_trajectory_json(doc);
  TrajectoryFile t;
  t.model = parse_urdf(doc["object"]["urdf"].get<std::string>());
  t.verb = verb_from_string(doc["verb"].get<std::string>());
  t.frames = doc["T"].get<int>();
  t.delta = doc["delta"].get<std::vector<double>>();
  require(t.delta.size() == 6 + t.model.n_dof(), "delta length does not match the object");
  for (const auto& s : doc["states"]) {
    ObjectState st;
    st.root_pose = s["root_pose"].get<RootPose>();
    st.joint_positions = s["joint_positions"].get<std::vector<double>>();
    t.states.push_back(std::move(st));
  }
  for (Verb v : all_verbs())
    t.probabilities[static_cast<std::size_t>(class_index(v))] = doc["probabilities"][std::string(to_string(v))].get<double>();
  t.final_loss = doc["final_loss"].get<double>();
  return t;
}

TrajectoryFile load_trajectory(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, "trajectory file: " + std::string(e.what()));
  }
  return trajectory_from_json(doc);
}

}  // namespace verbgen
