#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "verbgen/procedural.hpp"
#include "verbgen/render.hpp"
#include "verbgen/verbs.hpp"

namespace verbgen {

inline constexpr int kManifestSchemaVersion = 1;

struct DatasetEntry {
  std::string id;
  std::string category;
  int instance = 0;
  std::uint64_t model_seed = 0;
  Verb verb = Verb::None;
  /// Frame paths relative to the manifest directory; empty when skipped.
  std::vector<std::string> frames;
  /// "ok", or the reason the (object, verb) pairing was not generated.
  std::string status = "ok";
  std::string split = "unassigned";

  bool ok() const { return status == "ok"; }
};

struct DatasetManifest {
  std::vector<DatasetEntry> entries;
  std::vector<std::string> categories;
  ImageSize size;
  CameraConfig camera;
  VerbConventions conventions;
  std::vector<int> sample_indices;
  std::uint64_t seed = 0;
  int instances_per_category = 0;
  /// Directory holding manifest.json; frame paths resolve against it.
  std::filesystem::path root;

  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& doc, std::filesystem::path root);

  std::filesystem::path frame_path(const DatasetEntry& e, int frame) const {
    return root / e.frames.at(static_cast<std::size_t>(frame));
  }
};

struct DatasetConfig {
  std::vector<std::string> categories;
  int instances_per_category = 20;
  ImageSize size;
  CameraConfig camera;
  VerbConventions conventions;
  int sample_count = 5;
  std::uint64_t seed = 0;
};

/// Seed of the procedural model used for (category, instance) in a dataset.
std::uint64_t instance_seed(std::uint64_t dataset_seed, int instance);

/// Generates, renders and writes every (category, instance, label) trajectory
/// under `out_dir`, then writes `out_dir/manifest.json`.
DatasetManifest build_dataset(const DatasetConfig& config, const std::filesystem::path& out_dir,
                              const CategoryConfig& categories = CategoryConfig::builtin());

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
/// Loads and checks that every referenced frame exists.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Indices into `manifest.entries` for one all-but-one fold.
struct Split {
  std::vector<std::size_t> train, val, test;
};

Split split_kfold(const DatasetManifest& manifest, const std::string& test_category,
                  double val_fraction = 0.2, std::uint64_t seed = 0);
/// Shuffled 80/20 train/val split of the given categories, plus every entry
/// of `test_categories` as test.
Split split_fixed(const DatasetManifest& manifest, const std::vector<std::string>& train_categories,
                  const std::vector<std::string>& test_categories, double val_fraction = 0.2,
                  std::uint64_t seed = 0);

nlohmann::json camera_to_json(const CameraConfig& camera);
CameraConfig camera_from_json(const nlohmann::json& j);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace verbgen
