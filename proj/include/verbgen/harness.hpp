#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "verbgen/cmaes.hpp"
#include "verbgen/dataset.hpp"
#include "verbgen/nn/train.hpp"
#include "verbgen/verbs.hpp"

namespace verbgen {

/// Column groups of the results table.
enum class VerbGroup { Translate, OpenClose, RemoveInsertPart, RemoveWhole, Rotate, None };
inline constexpr int kNumGroups = 6;

VerbGroup group_of(Verb verb);
std::string_view to_string(VerbGroup group);
const std::array<VerbGroup, kNumGroups>& all_groups();

class ConfusionMatrix {
 public:
  /// Rows are true labels, columns predictions.
  void add(int truth, int predicted);
  int count(int truth, int predicted) const { return counts_.at(truth).at(predicted); }
  int row_total(int truth) const;
  int total() const;
  int correct() const;

  /// Header row and column list verb names.
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;

  nlohmann::json to_json() const;
  static ConfusionMatrix from_json(const nlohmann::json& j);

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::array<std::array<int, kNumVerbs>, kNumVerbs> counts_{};
};

/// Accuracies in percent; NaN for groups without test samples.
struct GroupScores {
  std::array<double, kNumGroups> accuracy{};
  std::array<int, kNumGroups> count{};
  double overall = 0.0;
  int total = 0;

  nlohmann::json to_json() const;
  static GroupScores from_json(const nlohmann::json& j);
};

GroupScores score_groups(const ConfusionMatrix& confusion);

/// Mean and sample standard deviation (0 for a single value); NaNs are skipped.
struct Cell {
  double mean = 0.0;
  double stddev = 0.0;
  int n = 0;
};

Cell summarize(std::span<const double> values);

class ResultsTable {
 public:
  void add(const std::string& category, const GroupScores& scores);

  const std::vector<std::string>& categories() const { return order_; }
  const std::vector<GroupScores>& runs(const std::string& category) const { return runs_.at(category); }
  Cell cell(const std::string& category, VerbGroup group) const;
  Cell overall(const std::string& category) const;
  /// Mean over categories of each category's mean overall accuracy.
  double overall_mean() const;

  /// One row per category plus a final Mean row; cells read "mean ± std".
  std::string to_csv() const;
  /// Per-category bars with error bars, for plotting.
  nlohmann::json plot_data() const;

 private:
  std::vector<std::string> order_;
  std::map<std::string, std::vector<GroupScores>> runs_;
};

/// Defaults describe the desk-scale k-fold run: six procedural categories,
/// 20 instances each, 64x64 frames, 5 timesteps, 40 epochs, 3 seeds.
struct ExperimentConfig {
  ExperimentConfig();

  DatasetConfig dataset;
  int frames = 5;
  nn::TrainConfig training;
  nn::Architecture arch;
  double val_fraction = 0.2;
  /// One training per seed; the seed drives both the split and the weights.
  std::vector<std::uint64_t> seeds{1, 2, 3};
  /// "kfold" or "fixed".
  std::string protocol = "kfold";
  std::vector<std::string> train_categories;
  std::vector<std::string> similar_categories;
  std::vector<std::string> farther_categories;
  CmaConfig optimizer;
  std::filesystem::path output_dir = "verbgen-out";
  /// Reuse fold results already on disk when their inputs match.
  bool resume = false;

  /// Frame size and count follow the dataset and `frames`.
  nn::Architecture architecture() const;
  /// Throws Error(UnknownCategory / InvalidArgument).
  void validate(const CategoryConfig& categories = CategoryConfig::builtin()) const;

  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static ExperimentConfig from_json(const nlohmann::json& doc);
  static ExperimentConfig load(const std::filesystem::path& path);
};

using Progress = std::function<void(const std::string&)>;

/// Entries of a manifest loaded once and shared by every fold.
struct SampleCache {
  const DatasetManifest* manifest = nullptr;
  nn::SampleSet samples;
  /// Manifest entry index -> sample index, -1 for skipped entries.
  std::vector<std::ptrdiff_t> position;

  SampleCache(const DatasetManifest& manifest, int frames);
  nn::SampleSet take(std::span<const std::size_t> entries) const;
};

struct EvalReport {
  ConfusionMatrix confusion;
  GroupScores scores;
};

EvalReport evaluate_entries(const nn::CnnModel& model, const SampleCache& cache, std::span<const std::size_t> entries);

struct FoldResult {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<nn::EpochMetrics> metrics;
  /// Per test category.
  std::map<std::string, EvalReport> reports;
  /// Inputs the result was produced from; compared when resuming.
  nlohmann::json inputs;

  nlohmann::json to_json() const;
  static FoldResult from_json(const nlohmann::json& j);
};

/// Trains on split.train / split.val and evaluates split.test per category.
/// Writes model.bin, metrics.jsonl, split.json, confusion_<category>.csv and
/// result.json into `dir`. Throws Error(InvalidArgument) if a test category
/// leaks into training.
FoldResult run_fold(const SampleCache& cache, const Split& split, const std::string& name,
                    const ExperimentConfig& config, std::uint64_t seed, const std::filesystem::path& dir,
                    const Progress& progress = {});

/// Every manifest category takes a turn as the held-out one, for every seed.
/// Writes results_table.csv and plot_data.json into the output directory.
ResultsTable run_kfold(const DatasetManifest& manifest, const ExperimentConfig& config, const Progress& progress = {});

struct CompareResult {
  double similar_mean = 0.0;
  double farther_mean = 0.0;
  std::map<std::string, Cell> per_category;

  nlohmann::json to_json() const;
};

/// Trains once per seed on the train categories and evaluates both test lists.
CompareResult run_compare(const DatasetManifest& manifest, const ExperimentConfig& config,
                          const Progress& progress = {});

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace verbgen
