// verbgen: dataset generation, training, evaluation, experiments and
// verb-conditioned trajectory optimization.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "verbgen/dataset.hpp"
#include "verbgen/error.hpp"
#include "verbgen/harness.hpp"
#include "verbgen/nn/train.hpp"
#include "verbgen/planner.hpp"

namespace fs = std::filesystem;
using namespace verbgen;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> repeats;
  std::optional<std::string> out;
  std::vector<std::string> categories;
  std::optional<int> instances, size, epochs, frames, batch;
  std::optional<double> lr;
  std::optional<int> generations, population;
  std::optional<double> sigma0;
  bool resume = false;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_path, "experiment config JSON")->check(CLI::ExistingFile);
  app->add_option("--seed", o.seed, "seed (dataset, training or optimizer, depending on the command)");
  app->add_option("--out", o.out, "output directory");
}

void add_dataset(CLI::App* app, Overrides& o) {
  app->add_option("--categories", o.categories, "procedural categories")->delimiter(',');
  app->add_option("--instances", o.instances, "instances per category")->check(CLI::PositiveNumber);
  app->add_option("--size", o.size, "square frame size in pixels")->check(CLI::Range(8, 1024));
}

void add_training(CLI::App* app, Overrides& o) {
  app->add_option("--epochs", o.epochs)->check(CLI::NonNegativeNumber);
  app->add_option("--frames", o.frames)->check(CLI::Range(2, kTrajectoryLength));
  app->add_option("--batch", o.batch)->check(CLI::PositiveNumber);
  app->add_option("--lr", o.lr)->check(CLI::PositiveNumber);
}

void add_optimizer(CLI::App* app, Overrides& o) {
  app->add_option("--generations", o.generations)->check(CLI::NonNegativeNumber);
  app->add_option("--population", o.population)->check(CLI::Range(2, 100000));
  app->add_option("--sigma0", o.sigma0)->check(CLI::PositiveNumber);
}

/// Config file first, then any flags given on the command line.
ExperimentConfig resolve(const Overrides& o, std::string_view seed_target) {
  ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(o.config_path);
  if (!o.categories.empty()) c.dataset.categories = o.categories;
  if (o.instances) c.dataset.instances_per_category = *o.instances;
  if (o.size) c.dataset.size = {*o.size, *o.size};
  if (o.epochs) c.training.epochs = *o.epochs;
  if (o.frames) c.frames = *o.frames;
  if (o.batch) c.training.batch_size = *o.batch;
  if (o.lr) c.training.lr = *o.lr;
  if (o.generations) c.optimizer.max_generations = *o.generations;
  if (o.population) c.optimizer.population = *o.population;
  if (o.sigma0) c.optimizer.sigma0 = *o.sigma0;
  if (o.out) c.output_dir = *o.out;
  if (o.resume) c.resume = true;
  if (o.seed || o.repeats) {
    if (seed_target == "dataset" && o.seed) c.dataset.seed = *o.seed;
    if (seed_target == "optimizer" && o.seed) c.optimizer.seed = *o.seed;
    if (seed_target == "training") {
      const std::uint64_t base = o.seed.value_or(c.seeds.front());
      const int n = o.repeats.value_or(static_cast<int>(c.seeds.size()));
      c.seeds.clear();
      for (int i = 0; i < n; ++i) c.seeds.push_back(base + static_cast<std::uint64_t>(i));
    }
  }
  c.validate();
  return c;
}

void log(const std::string& line) { std::cerr << line << std::endl; }

DatasetManifest manifest_or_generate(const std::string& manifest_path, const ExperimentConfig& c) {
  if (!manifest_path.empty()) return load_manifest(manifest_path);
  const fs::path dir = c.output_dir / "dataset";
  if (c.resume && fs::exists(dir / "manifest.json")) return load_manifest(dir / "manifest.json");
  log("generating dataset in " + dir.string());
  return build_dataset(c.dataset, dir);
}

void print_row(const std::string& category, const GroupScores& s) {
  std::cout << std::left << std::setw(22) << category << std::right << std::fixed << std::setprecision(1);
  for (VerbGroup g : all_groups()) {
    const double a = s.accuracy[static_cast<std::size_t>(g)];
    std::cout << "  " << to_string(g) << ' ';
    if (std::isfinite(a)) std::cout << a; else std::cout << '-';
  }
  std::cout << "  Overall " << s.overall << '\n';
}

int cmd_gen_data(const Overrides& o) {
  const ExperimentConfig c = resolve(o, "dataset");
  const fs::path dir = o.out ? fs::path(*o.out) : c.output_dir / "dataset";
  const DatasetManifest m = build_dataset(c.dataset, dir);
  std::size_t ok = 0;
  for (const auto& e : m.entries) ok += e.ok();
  std::cout << "entries " << m.entries.size() << " generated " << ok << " skipped " << m.entries.size() - ok << '\n'
            << "manifest " << (dir / "manifest.json").string() << " sha256 " << sha256_file(dir / "manifest.json") << '\n';
  return 0;
}

int cmd_train(const Overrides& o, const std::string& manifest_path, const std::string& test_category) {
  ExperimentConfig c = resolve(o, "training");
  const DatasetManifest m = load_manifest(manifest_path);
  c.dataset.size = m.size;
  const SampleCache cache(m, c.frames);
  const std::uint64_t seed = c.seeds.front();
  const Split split = split_kfold(m, test_category, c.val_fraction, seed);
  const fs::path dir = c.output_dir;
  const FoldResult r = run_fold(cache, split, test_category, c, seed, dir, log);
  std::cout << "model " << (dir / "model.bin").string() << "\nmetrics " << (dir / "metrics.jsonl").string() << '\n';
  print_row(test_category, r.reports.at(test_category).scores);
  return 0;
}

int cmd_eval(const Overrides& o, const std::string& model_path, const std::string& manifest_path,
             const std::string& test_category) {
  const ExperimentConfig c = resolve(o, "training");
  const nn::CnnModel model = nn::load_model(model_path);
  const DatasetManifest m = load_manifest(manifest_path);
  if (model.arch.height != m.size.height || model.arch.width != m.size.width)
    throw Error(ErrorCode::ShapeMismatch, "model input is " + std::to_string(model.arch.width) + "x" +
                                              std::to_string(model.arch.height) + ", manifest frames are " +
                                              std::to_string(m.size.width) + "x" + std::to_string(m.size.height));
  const SampleCache cache(m, model.arch.frames);
  const Split split = split_kfold(m, test_category, c.val_fraction, c.seeds.front());
  const EvalReport r = evaluate_entries(model, cache, split.test);
  const fs::path csv = c.output_dir / ("confusion_" + test_category + ".csv");
  fs::create_directories(c.output_dir);
  r.confusion.write_csv(csv);
  ResultsTable t;
  t.add(test_category, r.scores);
  write_text(c.output_dir / ("results_" + test_category + ".csv"), t.to_csv());
  print_row(test_category, r.scores);
  std::cout << "confusion " << csv.string() << '\n';
  return 0;
}

int cmd_kfold(const Overrides& o, const std::string& manifest_path) {
  ExperimentConfig c = resolve(o, "training");
  const DatasetManifest m = manifest_or_generate(manifest_path, c);
  c.dataset.size = m.size;
  const ResultsTable t = run_kfold(m, c, log);
  std::cout << t.to_csv() << "overall mean " << std::fixed << std::setprecision(2) << t.overall_mean() << "%\n"
            << "table " << (c.output_dir / "results_table.csv").string() << '\n';
  return 0;
}

int cmd_compare(const Overrides& o, const std::string& manifest_path) {
  ExperimentConfig c = resolve(o, "training");
  c.protocol = "fixed";
  const DatasetManifest m = manifest_or_generate(manifest_path, c);
  c.dataset.size = m.size;
  const CompareResult r = run_compare(m, c, log);
  std::cout << std::fixed << std::setprecision(1);
  for (const auto& [cat, cell] : r.per_category) std::cout << cat << ' ' << cell.mean << " ± " << cell.stddev << '\n';
  std::cout << "similar " << r.similar_mean << "\nfarther " << r.farther_mean << '\n';
  return 0;
}

int cmd_optimize(const Overrides& o, const std::string& model_path, const std::string& urdf, const std::string& category,
                 int instance, const std::string& verb_name) {
  const ExperimentConfig c = resolve(o, "optimizer");
  const auto verb = try_verb_from_string(verb_name);
  if (!verb || *verb == Verb::None)
    throw Error(ErrorCode::UnknownVerb, "'" + verb_name + "' is not a plannable verb; valid verbs: " + verb_list());
  const nn::CnnModel classifier = nn::load_model(model_path);
  ObjectModel object;
  if (!urdf.empty())
    object = load_urdf(urdf);
  else if (!category.empty())
    object = generate_procedural(category, instance_seed(c.dataset.seed, instance));
  else
    throw Error(ErrorCode::InvalidArgument, "optimize needs --urdf or --category");

  PlanRequest req;
  req.model = &object;
  req.initiation = canonical_initiation(object, *verb);
  req.verb = *verb;
  req.classifier = &classifier;
  req.camera = c.dataset.camera;
  req.frames = classifier.arch.frames;
  req.cma = c.optimizer;

  fs::create_directories(c.output_dir);
  std::ofstream trace(c.output_dir / "trace.jsonl");
  const PlanResult r = optimize_trajectory(req, [&](const CmaState& s, double best) {
    trace << cma_trace_line(s, best).dump() << '\n';
  });
  export_trajectory(r, object, c.output_dir / "trajectory.json");
  for (std::size_t t = 0; t < r.frames.size(); ++t) {
    std::ostringstream name;
    name << "frame_" << std::setw(2) << std::setfill('0') << t << ".png";
    write_png((c.output_dir / name.str()).string(), r.frames[t]);
  }

  std::size_t dim = 0;
  for (std::size_t i = 0; i < r.delta.size(); ++i)
    if (r.delta[i] != 0.0) dim = i;
  static const char* pose_names[] = {"x", "y", "z", "roll", "pitch", "yaw"};
  const std::string dim_name = dim < 6 ? pose_names[dim] : "joint " + object.dof(dim - 6).name;
  std::cout << "verb " << to_string(*verb) << "\ndelta " << dim_name << ' ' << r.delta[dim] << "\nloss " << r.final_loss
            << " (zero delta " << r.zero_loss << ")\np(" << to_string(*verb)
            << ") " << r.probabilities[static_cast<std::size_t>(class_index(*verb))] << '\n'
            << "trajectory " << (c.output_dir / "trajectory.json").string() << '\n';
  return 0;
}

int cmd_export(const Overrides& o, const std::string& trajectory_path, int size) {
  const ExperimentConfig c = resolve(o, "optimizer");
  const TrajectoryFile t = load_trajectory(trajectory_path);
  const auto replay = rollout(t.model, t.states.front(), t.delta, t.frames);
  if (replay != t.states)
    throw Error(ErrorCode::InvalidArgument, "stored states do not match a rollout of the stored delta");
  const fs::path dir = o.out ? fs::path(*o.out) : c.output_dir;
  fs::create_directories(dir);
  std::ostringstream csv;
  csv << std::setprecision(17) << "t,x,y,z,roll,pitch,yaw";
  for (std::size_t j = 0; j < t.model.n_dof(); ++j) csv << ',' << t.model.dof(j).name;
  csv << '\n';
  for (std::size_t k = 0; k < t.states.size(); ++k) {
    csv << k;
    for (double v : t.states[k].root_pose) csv << ',' << v;
    for (double v : t.states[k].joint_positions) csv << ',' << v;
    csv << '\n';
  }
  write_text(dir / "states.csv", csv.str());
  const auto frames = render_trajectory(t.model, t.states, c.dataset.camera, {size, size});
  for (std::size_t k = 0; k < frames.size(); ++k) {
    std::ostringstream name;
    name << "frame_" << std::setw(2) << std::setfill('0') << k << ".png";
    write_png((dir / name.str()).string(), frames[k]);
  }
  std::cout << "states " << (dir / "states.csv").string() << " (" << t.states.size() << " timesteps)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Verb-conditioned trajectory generation for articulated objects"};
  app.require_subcommand(1);
  Overrides o;
  std::string manifest, test_category, model, urdf, category, verb, trajectory;
  int instance = 1000, export_size = 256;

  auto* gen = app.add_subcommand("gen-data", "render a procedural dataset and its manifest");
  add_common(gen, o);
  add_dataset(gen, o);

  auto* train = app.add_subcommand("train", "train with one category held out");
  add_common(train, o);
  add_training(train, o);
  train->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  train->add_option("--test-category", test_category)->required();

  auto* eval = app.add_subcommand("eval", "evaluate a model on a held-out category");
  add_common(eval, o);
  eval->add_option("--model", model)->required()->check(CLI::ExistingFile);
  eval->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  eval->add_option("--test-category", test_category)->required();

  auto* kfold = app.add_subcommand("kfold", "all-but-one cross-category evaluation over every category and seed");
  auto* compare = app.add_subcommand("compare", "train on a fixed set, evaluate similar and farther categories");
  for (auto* sub : {kfold, compare}) {
    add_common(sub, o);
    add_dataset(sub, o);
    add_training(sub, o);
    sub->add_option("--manifest", manifest, "existing dataset; generated from the config when omitted")
        ->check(CLI::ExistingFile);
    sub->add_option("--repeats", o.repeats, "number of seeds, counting up from --seed")->check(CLI::PositiveNumber);
    sub->add_flag("--resume", o.resume, "reuse finished folds");
  }

  auto* optimize = app.add_subcommand("optimize", "search a trajectory for a verb with CMA-ES");
  add_common(optimize, o);
  add_optimizer(optimize, o);
  optimize->add_option("--model", model)->required()->check(CLI::ExistingFile);
  auto* src = optimize->add_option_group("object");
  src->add_option("--urdf", urdf)->check(CLI::ExistingFile);
  src->add_option("--category", category);
  src->require_option(1);
  optimize->add_option("--instance", instance, "procedural instance index");
  optimize->add_option("--verb", verb)->required();

  auto* exp = app.add_subcommand("export", "validate a trajectory file, write its states as CSV and render frames");
  add_common(exp, o);
  exp->add_option("--trajectory", trajectory)->required()->check(CLI::ExistingFile);
  exp->add_option("--render-size", export_size)->check(CLI::Range(8, 4096));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen_data(o);
    if (*train) return cmd_train(o, manifest, test_category);
    if (*eval) return cmd_eval(o, model, manifest, test_category);
    if (*kfold) return cmd_kfold(o, manifest);
    if (*compare) return cmd_compare(o, manifest);
    if (*optimize) return cmd_optimize(o, model, urdf, category, instance, verb);
    if (*exp) return cmd_export(o, trajectory, export_size);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
