#include "verbgen/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "verbgen/error.hpp"

namespace verbgen {

namespace fs = std::filesystem;

VerbGroup group_of(Verb verb) {
  switch (verb) {
    case Verb::Push:
    case Verb::Pull:
    case Verb::Raise:
    case Verb::Lower:
    case Verb::TranslateLeft:
    case Verb::TranslateRight:
      return VerbGroup::Translate;
    case Verb::Open:
    case Verb::Close:
      return VerbGroup::OpenClose;
    case Verb::RemovePart:
    case Verb::InsertPart:
      return VerbGroup::RemoveInsertPart;
    case Verb::RemoveWhole:
      return VerbGroup::RemoveWhole;
    case Verb::Roll:
    case Verb::Turn:
    case Verb::Flip:
      return VerbGroup::Rotate;
    case Verb::None:
      return VerbGroup::None;
  }
  throw Error(ErrorCode::UnknownVerb, "verb index " + std::to_string(static_cast<int>(verb)));
}

std::string_view to_string(VerbGroup group) {
  switch (group) {
    case VerbGroup::Translate: return "Translate";
    case VerbGroup::OpenClose: return "Open/Close";
    case VerbGroup::RemoveInsertPart: return "Remove/Insert Part";
    case VerbGroup::RemoveWhole: return "RemoveWhole";
    case VerbGroup::Rotate: return "Rotate";
    case VerbGroup::None: return "None";
  }
  return "?";
}

const std::array<VerbGroup, kNumGroups>& all_groups() {
  static const std::array<VerbGroup, kNumGroups> g{VerbGroup::Translate,   VerbGroup::OpenClose, VerbGroup::RemoveInsertPart,
                                                   VerbGroup::RemoveWhole, VerbGroup::Rotate,    VerbGroup::None};
  return g;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorCode::Io, "short write to " + path.string());
}

namespace {

nlohmann::json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
}

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
double num_or_nan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

// ---- confusion matrix --------------------------------------------------------

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth < 0 || truth >= kNumVerbs || predicted < 0 || predicted >= kNumVerbs)
    throw Error(ErrorCode::InvalidArgument, "class index out of range");
  ++counts_[static_cast<std::size_t>(truth)][static_cast<std::size_t>(predicted)];
}

int ConfusionMatrix::row_total(int truth) const {
  const auto& r = counts_.at(static_cast<std::size_t>(truth));
  return std::accumulate(r.begin(), r.end(), 0);
}

int ConfusionMatrix::total() const {
  int t = 0;
  for (int i = 0; i < kNumVerbs; ++i) t += row_total(i);
  return t;
}

int ConfusionMatrix::correct() const {
  int c = 0;
  for (std::size_t i = 0; i < kNumVerbs; ++i) c += counts_[i][i];
  return c;
}

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream out;
  out << "truth\\predicted";
  for (Verb v : all_verbs()) out << ',' << to_string(v);
  out << '\n';
  for (std::size_t i = 0; i < kNumVerbs; ++i) {
    out << to_string(verb_from_index(static_cast<int>(i)));
    for (std::size_t j = 0; j < kNumVerbs; ++j) out << ',' << counts_[i][j];
    out << '\n';
  }
  return out.str();
}

void ConfusionMatrix::write_csv(const fs::path& path) const { write_text(path, to_csv()); }

nlohmann::json ConfusionMatrix::to_json() const { return counts_; }

ConfusionMatrix ConfusionMatrix::from_json(const nlohmann::json& j) {
  ConfusionMatrix m;
  m.counts_ = j.get<decltype(m.counts_)>();
  return m;
}

// ---- group scores ------------------------------------------------------------

GroupScores score_groups(const ConfusionMatrix& confusion) {
  GroupScores s;
  std::array<int, kNumGroups> correct{};
  for (Verb v : all_verbs()) {
    const int i = class_index(v);
    const auto g = static_cast<std::size_t>(group_of(v));
    s.count[g] += confusion.row_total(i);
    correct[g] += confusion.count(i, i);
  }
  for (std::size_t g = 0; g < kNumGroups; ++g)
    s.accuracy[g] = s.count[g] ? 100.0 * correct[g] / s.count[g] : std::numeric_limits<double>::quiet_NaN();
  s.total = confusion.total();
  s.overall = s.total ? 100.0 * confusion.correct() / s.total : std::numeric_limits<double>::quiet_NaN();
  return s;
}

nlohmann::json GroupScores::to_json() const {
  nlohmann::json groups = nlohmann::json::object();
  for (VerbGroup g : all_groups()) {
    const auto i = static_cast<std::size_t>(g);
    groups[std::string(verbgen::to_string(g))] = {{"accuracy", num(accuracy[i])}, {"count", count[i]}};
  }
  return {{"groups", groups}, {"overall", num(overall)}, {"total", total}};
}

GroupScores GroupScores::from_json(const nlohmann::json& j) {
  GroupScores s;
  for (VerbGroup g : all_groups()) {
    const auto i = static_cast<std::size_t>(g);
    const auto& e = j.at("groups").at(std::string(verbgen::to_string(g)));
    s.accuracy[i] = num_or_nan(e.at("accuracy"));
    s.count[i] = e.at("count").get<int>();
  }
  s.overall = num_or_nan(j.at("overall"));
  s.total = j.at("total").get<int>();
  return s;
}

Cell summarize(std::span<const double> values) {
  Cell c;
  double sum = 0.0;
  for (double v : values)
    if (std::isfinite(v)) {
      sum += v;
      ++c.n;
    }
  if (c.n == 0) {
    c.mean = c.stddev = std::numeric_limits<double>::quiet_NaN();
    return c;
  }
  c.mean = sum / c.n;
  if (c.n > 1) {
    double ss = 0.0;
    for (double v : values)
      if (std::isfinite(v)) ss += (v - c.mean) * (v - c.mean);
    c.stddev = std::sqrt(ss / (c.n - 1));
  }
  return c;
}

// ---- results table -----------------------------------------------------------

void ResultsTable::add(const std::string& category, const GroupScores& scores) {
  if (!runs_.count(category)) order_.push_back(category);
  runs_[category].push_back(scores);
}

Cell ResultsTable::cell(const std::string& category, VerbGroup group) const {
  std::vector<double> v;
  for (const auto& r : runs_.at(category)) v.push_back(r.accuracy[static_cast<std::size_t>(group)]);
  return summarize(v);
}

Cell ResultsTable::overall(const std::string& category) const {
  std::vector<double> v;
  for (const auto& r : runs_.at(category)) v.push_back(r.overall);
  return summarize(v);
}

double ResultsTable::overall_mean() const {
  std::vector<double> v;
  for (const auto& c : order_) v.push_back(overall(c).mean);
  return summarize(v).mean;
}

namespace {

std::string format_cell(const Cell& c) {
  if (c.n == 0) return "";
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << c.mean << " ± " << c.stddev;
  return s.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

}  // namespace

std::string ResultsTable::to_csv() const {
  std::ostringstream out;
  out << "category";
  for (VerbGroup g : all_groups()) out << ',' << csv_field(std::string(verbgen::to_string(g)));
  out << ",Overall\n";
  for (const auto& c : order_) {
    out << csv_field(c);
    for (VerbGroup g : all_groups()) out << ',' << format_cell(cell(c, g));
    out << ',' << format_cell(overall(c)) << '\n';
  }
  out << "Mean";
  for (VerbGroup g : all_groups()) {
    std::vector<double> means;
    for (const auto& c : order_) means.push_back(cell(c, g).mean);
    const Cell m = summarize(means);
    out << ',';
    if (m.n) out << std::fixed << std::setprecision(1) << m.mean;
  }
  out << ',' << std::fixed << std::setprecision(2) << overall_mean() << '\n';
  return out.str();
}

nlohmann::json ResultsTable::plot_data() const {
  nlohmann::json bars = nlohmann::json::array();
  for (const auto& c : order_) {
    const Cell o = overall(c);
    nlohmann::json groups = nlohmann::json::object();
    for (VerbGroup g : all_groups()) {
      const Cell x = cell(c, g);
      groups[std::string(verbgen::to_string(g))] = {{"mean", num(x.mean)}, {"std", num(x.stddev)}};
    }
    bars.push_back({{"category", c}, {"accuracy", num(o.mean)}, {"std", num(o.stddev)}, {"seeds", o.n}, {"groups", groups}});
  }
  return {{"kind", "per-category accuracy"}, {"y_label", "accuracy (%)"}, {"bars", bars}, {"mean", num(overall_mean())}};
}

// ---- experiment config -------------------------------------------------------

ExperimentConfig::ExperimentConfig() {
  dataset.categories = {"box-with-lid", "cabinet-hinged-door", "cabinet-drawer",
                        "laptop-like",  "safe-like",           "trashcan-like"};
  dataset.instances_per_category = 20;
  dataset.seed = 7;
}

nn::Architecture ExperimentConfig::architecture() const {
  nn::Architecture a = arch;
  a.frames = frames;
  a.height = dataset.size.height;
  a.width = dataset.size.width;
  return a;
}

void ExperimentConfig::validate(const CategoryConfig& categories) const {
  auto known = [&](const std::vector<std::string>& list) {
    for (const auto& c : list)
      if (!categories.contains(c)) throw Error(ErrorCode::UnknownCategory, "unknown category '" + c + "'");
  };
  known(dataset.categories);
  known(train_categories);
  known(similar_categories);
  known(farther_categories);
  if (frames < 2 || frames > kTrajectoryLength)
    throw Error(ErrorCode::InvalidArgument, "frames must be in [2, " + std::to_string(kTrajectoryLength) + "]");
  if (dataset.instances_per_category < 1) throw Error(ErrorCode::InvalidArgument, "instances must be positive");
  if (training.epochs < 0 || training.batch_size < 1) throw Error(ErrorCode::InvalidArgument, "bad training config");
  if (seeds.empty()) throw Error(ErrorCode::InvalidArgument, "at least one seed is required");
  if (protocol != "kfold" && protocol != "fixed")
    throw Error(ErrorCode::InvalidArgument, "protocol must be \"kfold\" or \"fixed\"");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw Error(ErrorCode::InvalidArgument, "val_fraction must be in [0, 1)");
  architecture().validate();
}

namespace {

void check_keys(const nlohmann::json& j, std::string_view section, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config section '" + std::string(section) + "' must be an object");
  for (const auto& [k, v] : j.items())
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw Error(ErrorCode::InvalidArgument, "unknown config key '" + std::string(section) + "." + k + "'");
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

nlohmann::json ExperimentConfig::to_json() const {
  const nn::Architecture a = architecture();
  return {
      {"dataset",
       {{"categories", dataset.categories},
        {"instances", dataset.instances_per_category},
        {"width", dataset.size.width},
        {"height", dataset.size.height},
        {"seed", dataset.seed},
        {"camera", camera_to_json(dataset.camera)}}},
      {"training",
       {{"epochs", training.epochs},
        {"frames", frames},
        {"batch_size", training.batch_size},
        {"lr", training.lr},
        {"beta1", training.beta1},
        {"beta2", training.beta2},
        {"eps", training.eps},
        {"val_fraction", val_fraction},
        {"conv1", a.conv1},
        {"conv2", a.conv2},
        {"dense1", a.dense1},
        {"dense2", a.dense2}}},
      {"evaluation",
       {{"protocol", protocol},
        {"seeds", seeds},
        {"train_categories", train_categories},
        {"similar_categories", similar_categories},
        {"farther_categories", farther_categories}}},
      {"optimizer",
       {{"sigma0", optimizer.sigma0},
        {"population", optimizer.population},
        {"generations", optimizer.max_generations},
        {"seed", optimizer.seed}}},
      {"output_dir", output_dir.string()},
      {"resume", resume},
  };
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& doc) {
  ExperimentConfig c;
  try {
    check_keys(doc, "config", {"dataset", "training", "evaluation", "optimizer", "output_dir", "resume"});
    if (doc.contains("dataset")) {
      const auto& d = doc["dataset"];
      check_keys(d, "dataset", {"categories", "instances", "width", "height", "seed", "camera"});
      read(d, "categories", c.dataset.categories);
      read(d, "instances", c.dataset.instances_per_category);
      read(d, "width", c.dataset.size.width);
      read(d, "height", c.dataset.size.height);
      read(d, "seed", c.dataset.seed);
      if (d.contains("camera")) c.dataset.camera = camera_from_json(d["camera"]);
    }
    if (doc.contains("training")) {
      const auto& t = doc["training"];
      check_keys(t, "training",
                 {"epochs", "frames", "batch_size", "lr", "beta1", "beta2", "eps", "val_fraction", "conv1", "conv2",
                  "dense1", "dense2"});
      read(t, "epochs", c.training.epochs);
      read(t, "frames", c.frames);
      read(t, "batch_size", c.training.batch_size);
      read(t, "lr", c.training.lr);
      read(t, "beta1", c.training.beta1);
      read(t, "beta2", c.training.beta2);
      read(t, "eps", c.training.eps);
      read(t, "val_fraction", c.val_fraction);
      read(t, "conv1", c.arch.conv1);
      read(t, "conv2", c.arch.conv2);
      read(t, "dense1", c.arch.dense1);
      read(t, "dense2", c.arch.dense2);
    }
    if (doc.contains("evaluation")) {
      const auto& e = doc["evaluation"];
      check_keys(e, "evaluation", {"protocol", "seeds", "train_categories", "similar_categories", "farther_categories"});
      read(e, "protocol", c.protocol);
      read(e, "seeds", c.seeds);
      read(e, "train_categories", c.train_categories);
      read(e, "similar_categories", c.similar_categories);
      read(e, "farther_categories", c.farther_categories);
    }
    if (doc.contains("optimizer")) {
      const auto& o = doc["optimizer"];
      check_keys(o, "optimizer", {"sigma0", "population", "generations", "seed"});
      read(o, "sigma0", c.optimizer.sigma0);
      read(o, "population", c.optimizer.population);
      read(o, "generations", c.optimizer.max_generations);
      read(o, "seed", c.optimizer.seed);
    }
    if (doc.contains("output_dir")) c.output_dir = doc["output_dir"].get<std::string>();
    read(doc, "resume", c.resume);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) { return from_json(read_json(path)); }

// ---- folds -------------------------------------------------------------------

SampleCache::SampleCache(const DatasetManifest& m, int frames) : manifest(&m), position(m.entries.size(), -1) {
  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < m.entries.size(); ++i)
    if (m.entries[i].ok()) {
      position[i] = static_cast<std::ptrdiff_t>(ok.size());
      ok.push_back(i);
    }
  samples = nn::load_samples(m, ok, frames);
}

nn::SampleSet SampleCache::take(std::span<const std::size_t> entries) const {
  std::vector<std::size_t> idx;
  idx.reserve(entries.size());
  for (std::size_t e : entries) {
    const std::ptrdiff_t p = position.at(e);
    if (p < 0) throw Error(ErrorCode::InvalidArgument, "entry " + manifest->entries[e].id + " was not generated");
    idx.push_back(static_cast<std::size_t>(p));
  }
  return samples.subset(idx);
}

EvalReport evaluate_entries(const nn::CnnModel& model, const SampleCache& cache, std::span<const std::size_t> entries) {
  const nn::SampleSet set = cache.take(entries);
  if (model.arch.frames != set.frames || model.arch.height != set.height || model.arch.width != set.width)
    throw Error(ErrorCode::ShapeMismatch, "model expects " + std::to_string(model.arch.frames) + " frames of " +
                                              std::to_string(model.arch.width) + "x" + std::to_string(model.arch.height) +
                                              ", dataset has " + std::to_string(set.frames) + " of " +
                                              std::to_string(set.width) + "x" + std::to_string(set.height));
  const nn::Evaluation ev = nn::evaluate(model, set);
  EvalReport r;
  for (std::size_t i = 0; i < set.size(); ++i) r.confusion.add(set.labels[i], ev.predicted[i]);
  r.scores = score_groups(r.confusion);
  return r;
}

namespace {

nlohmann::json ids_of(const DatasetManifest& m, std::span<const std::size_t> idx) {
  nlohmann::json a = nlohmann::json::array();
  for (std::size_t i : idx) a.push_back(m.entries[i].id);
  return a;
}

nn::EpochMetrics metrics_from_json(const nlohmann::json& j) {
  nn::EpochMetrics m;
  m.epoch = j.at("epoch").get<int>();
  m.train_loss = num_or_nan(j.at("train_loss"));
  m.train_acc = num_or_nan(j.at("train_acc"));
  m.val_loss = num_or_nan(j.at("val_loss"));
  m.val_acc = num_or_nan(j.at("val_acc"));
  return m;
}

std::string safe_name(std::string s) {
  for (char& c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) c = '_';
  return s;
}

}  // namespace

nlohmann::json FoldResult::to_json() const {
  nlohmann::json ms = nlohmann::json::array();
  for (const auto& m : metrics) ms.push_back(m.to_json());
  nlohmann::json reps = nlohmann::json::object();
  for (const auto& [cat, r] : reports) reps[cat] = {{"confusion", r.confusion.to_json()}, {"scores", r.scores.to_json()}};
  return {{"name", name}, {"seed", seed}, {"metrics", ms}, {"reports", reps}, {"inputs", inputs}};
}

FoldResult FoldResult::from_json(const nlohmann::json& j) {
  FoldResult f;
  f.name = j.at("name").get<std::string>();
  f.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& m : j.at("metrics")) f.metrics.push_back(metrics_from_json(m));
  for (const auto& [cat, r] : j.at("reports").items()) {
    EvalReport e;
    e.confusion = ConfusionMatrix::from_json(r.at("confusion"));
    e.scores = score_groups(e.confusion);
    f.reports[cat] = e;
  }
  f.inputs = j.at("inputs");
  return f;
}

FoldResult run_fold(const SampleCache& cache, const Split& split, const std::string& name, const ExperimentConfig& config,
                    std::uint64_t seed, const fs::path& dir, const Progress& progress) {
  const DatasetManifest& m = *cache.manifest;
  std::set<std::string> test_cats;
  for (std::size_t i : split.test) test_cats.insert(m.entries.at(i).category);
  for (const auto* part : {&split.train, &split.val})
    for (std::size_t i : *part)
      if (test_cats.count(m.entries.at(i).category))
        throw Error(ErrorCode::InvalidArgument, "entry " + m.entries[i].id + " of test category " +
                                                    m.entries[i].category + " leaked into training");

  const fs::path manifest_file = m.root / "manifest.json";
  nlohmann::json inputs = {{"name", name},
                           {"seed", seed},
                           {"training", config.to_json()["training"]},
                           {"manifest_sha256", fs::exists(manifest_file) ? sha256_file(manifest_file) : std::string()},
                           {"train", split.train.size()},
                           {"val", split.val.size()},
                           {"test", split.test.size()}};

  const fs::path result_file = dir / "result.json";
  if (config.resume && fs::exists(result_file)) {
    FoldResult prev = FoldResult::from_json(read_json(result_file));
    if (prev.inputs == inputs) {
      if (progress) progress(name + " seed " + std::to_string(seed) + ": reusing " + result_file.string());
      return prev;
    }
  }

  fs::create_directories(dir);
  write_text(dir / "split.json", nlohmann::json{{"train", ids_of(m, split.train)},
                                                {"val", ids_of(m, split.val)},
                                                {"test", ids_of(m, split.test)}}
                                     .dump(1) +
                                     "\n");

  nn::TrainConfig tc = config.training;
  tc.seed = seed;
  const nn::SampleSet train_set = cache.take(split.train);
  const nn::SampleSet val_set = cache.take(split.val);
  std::ofstream metrics_out(dir / "metrics.jsonl");
  if (!metrics_out) throw Error(ErrorCode::Io, "cannot write " + (dir / "metrics.jsonl").string());
  const nn::TrainResult trained = nn::train(train_set, val_set, config.architecture(), tc, [&](const nn::EpochMetrics& e) {
    metrics_out << e.to_json().dump() << '\n';
    metrics_out.flush();
    if (progress && (e.epoch == tc.epochs || e.epoch % 10 == 0)) {
      std::ostringstream s;
      s << name << " seed " << seed << " epoch " << e.epoch << ": loss " << std::setprecision(4) << e.train_loss
        << " acc " << e.train_acc << " val_acc " << e.val_acc;
      progress(s.str());
    }
  });
  nn::save_model(trained.model, (dir / "model.bin").string());

  FoldResult r;
  r.name = name;
  r.seed = seed;
  r.metrics = trained.metrics;
  r.inputs = inputs;
  for (const auto& cat : test_cats) {
    std::vector<std::size_t> idx;
    for (std::size_t i : split.test)
      if (m.entries[i].category == cat) idx.push_back(i);
    EvalReport rep = evaluate_entries(trained.model, cache, idx);
    rep.confusion.write_csv(dir / ("confusion_" + safe_name(cat) + ".csv"));
    r.reports[cat] = rep;
  }
  write_text(result_file, r.to_json().dump(1) + "\n");
  return r;
}

ResultsTable run_kfold(const DatasetManifest& manifest, const ExperimentConfig& config, const Progress& progress) {
  config.validate();
  const SampleCache cache(manifest, config.frames);
  ResultsTable table;
  for (const auto& cat : manifest.categories) {
    for (std::uint64_t seed : config.seeds) {
      const Split split = split_kfold(manifest, cat, config.val_fraction, seed);
      const fs::path dir = config.output_dir / "kfold" / safe_name(cat) / ("seed" + std::to_string(seed));
      const FoldResult r = run_fold(cache, split, cat, config, seed, dir, progress);
      const GroupScores& s = r.reports.at(cat).scores;
      table.add(cat, s);
      if (progress) {
        std::ostringstream line;
        line << "held out " << cat << " seed " << seed << ": accuracy " << std::fixed << std::setprecision(1) << s.overall
             << "%";
        progress(line.str());
      }
    }
  }
  write_text(config.output_dir / "results_table.csv", table.to_csv());
  write_text(config.output_dir / "plot_data.json", table.plot_data().dump(2) + "\n");
  return table;
}

nlohmann::json CompareResult::to_json() const {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [c, cell] : per_category) per[c] = {{"mean", num(cell.mean)}, {"std", num(cell.stddev)}, {"seeds", cell.n}};
  return {{"similar_mean", num(similar_mean)}, {"farther_mean", num(farther_mean)}, {"per_category", per}};
}

CompareResult run_compare(const DatasetManifest& manifest, const ExperimentConfig& config, const Progress& progress) {
  config.validate();
  if (config.train_categories.empty()) throw Error(ErrorCode::InvalidArgument, "compare needs train categories");
  if (config.similar_categories.empty() || config.farther_categories.empty())
    throw Error(ErrorCode::InvalidArgument, "compare needs non-empty similar and farther test lists");
  for (const auto* list : {&config.similar_categories, &config.farther_categories})
    for (const auto& c : *list)
      if (std::find(config.train_categories.begin(), config.train_categories.end(), c) != config.train_categories.end())
        throw Error(ErrorCode::InvalidArgument, "category '" + c + "' is in both the train set and a test list");

  std::vector<std::string> tests = config.similar_categories;
  for (const auto& c : config.farther_categories)
    if (std::find(tests.begin(), tests.end(), c) == tests.end()) tests.push_back(c);

  const SampleCache cache(manifest, config.frames);
  std::map<std::string, std::vector<double>> acc;
  for (std::uint64_t seed : config.seeds) {
    const Split split = split_fixed(manifest, config.train_categories, tests, config.val_fraction, seed);
    const fs::path dir = config.output_dir / "compare" / ("seed" + std::to_string(seed));
    const FoldResult r = run_fold(cache, split, "compare", config, seed, dir, progress);
    for (const auto& c : tests) acc[c].push_back(r.reports.at(c).scores.overall);
  }

  CompareResult out;
  for (const auto& [c, v] : acc) out.per_category[c] = summarize(v);
  auto group_mean = [&](const std::vector<std::string>& list) {
    std::vector<double> v;
    for (const auto& c : list) v.push_back(out.per_category.at(c).mean);
    return summarize(v).mean;
  };
  out.similar_mean = group_mean(config.similar_categories);
  out.farther_mean = group_mean(config.farther_categories);
  write_text(config.output_dir / "compare.json", out.to_json().dump(2) + "\n");
  return out;
}

}  // namespace verbgen
