#include "verbgen/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "verbgen/error.hpp"
#include "verbgen/seed.hpp"

namespace verbgen {

namespace fs = std::filesystem;

namespace {

nlohmann::json vec_json(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

Eigen::Vector3d vec_from(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

std::string frame_name(int k) {
  std::ostringstream out;
  out << "frame_" << std::setw(2) << std::setfill('0') << k << ".png";
  return out.str();
}

}  // namespace

nlohmann::json camera_to_json(const CameraConfig& c) {
  return {{"eye", vec_json(c.eye)},
          {"look_at", vec_json(c.look_at)},
          {"up", vec_json(c.up)},
          {"vertical_fov", c.vertical_fov},
          {"near", c.near_plane},
          {"far", c.far_plane},
          {"background", vec_json(c.background)},
          {"light_direction", vec_json(c.light_direction)}};
}

CameraConfig camera_from_json(const nlohmann::json& j) {
  CameraConfig c;
  if (j.contains("eye")) c.eye = vec_from(j["eye"]);
  if (j.contains("look_at")) c.look_at = vec_from(j["look_at"]);
  if (j.contains("up")) c.up = vec_from(j["up"]);
  c.vertical_fov = j.value("vertical_fov", c.vertical_fov);
  c.near_plane = j.value("near", c.near_plane);
  c.far_plane = j.value("far", c.far_plane);
  if (j.contains("background")) c.background = vec_from(j["background"]);
  if (j.contains("light_direction")) c.light_direction = vec_from(j["light_direction"]);
  c.validate();
  return c;
}

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json entries_json = nlohmann::json::array();
  for (const DatasetEntry& e : entries) {
    entries_json.push_back({{"id", e.id},
                            {"category", e.category},
                            {"instance", e.instance},
                            {"model_seed", e.model_seed},
                            {"verb", std::string(to_string(e.verb))},
                            {"label", class_index(e.verb)},
                            {"frames", e.frames},
                            {"status", e.status},
                            {"split", e.split}});
  }
  return {{"schema_version", kManifestSchemaVersion},
          {"categories", categories},
          {"instances_per_category", instances_per_category},
          {"image_size", {{"width", size.width}, {"height", size.height}}},
          {"camera", camera_to_json(camera)},
          {"conventions",
           {{"translation_total", conventions.translation_total},
            {"translation_spread", conventions.translation_spread},
            {"roll_total", conventions.roll_total},
            {"turn_total", conventions.turn_total},
            {"flip_total", conventions.flip_total},
            {"dof", conventions.dof}}},
          {"sample_indices", sample_indices},
          {"seed", seed},
          {"entries", entries_json}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& doc, fs::path root) {
  const int version = doc.at("schema_version").get<int>();
  if (version != kManifestSchemaVersion)
    throw Error(ErrorCode::VersionMismatch, "manifest schema_version " + std::to_string(version));
  DatasetManifest m;
  m.root = std::move(root);
  m.categories = doc.at("categories").get<std::vector<std::string>>();
  m.instances_per_category = doc.at("instances_per_category").get<int>();
  m.size = {doc.at("image_size").at("width").get<int>(), doc.at("image_size").at("height").get<int>()};
  m.camera = camera_from_json(doc.at("camera"));
  const auto& conv = doc.at("conventions");
  m.conventions.translation_total = conv.at("translation_total").get<double>();
  m.conventions.translation_spread = conv.at("translation_spread").get<double>();
  m.conventions.roll_total = conv.at("roll_total").get<double>();
  m.conventions.turn_total = conv.at("turn_total").get<double>();
  m.conventions.flip_total = conv.at("flip_total").get<double>();
  m.conventions.dof = conv.at("dof").get<std::size_t>();
  m.sample_indices = doc.at("sample_indices").get<std::vector<int>>();
  m.seed = doc.at("seed").get<std::uint64_t>();
  for (const auto& j : doc.at("entries")) {
    DatasetEntry e;
    e.id = j.at("id").get<std::string>();
    e.category = j.at("category").get<std::string>();
    e.instance = j.at("instance").get<int>();
    e.model_seed = j.at("model_seed").get<std::uint64_t>();
    e.verb = verb_from_string(j.at("verb").get<std::string>());
    e.frames = j.at("frames").get<std::vector<std::string>>();
    e.status = j.at("status").get<std::string>();
    e.split = j.value("split", "unassigned");
    m.entries.push_back(std::move(e));
  }
  return m;
}

std::uint64_t instance_seed(std::uint64_t dataset_seed, int instance) {
  return mix_seed(dataset_seed) % 1000000007ULL * 1000 + static_cast<std::uint64_t>(instance);
}

DatasetManifest build_dataset(const DatasetConfig& config, const fs::path& out_dir,
                              const CategoryConfig& categories) {
  if (config.categories.size() < 2)
    throw Error(ErrorCode::InvalidArgument, "a dataset needs at least two categories");
  if (config.instances_per_category < 1)
    throw Error(ErrorCode::InvalidArgument, "instances_per_category must be at least 1");
  std::set<std::string> unique(config.categories.begin(), config.categories.end());
  if (unique.size() != config.categories.size())
    throw Error(ErrorCode::InvalidArgument, "duplicate category in dataset config");
  for (const auto& c : config.categories) categories.at(c);
  config.camera.validate();

  DatasetManifest m;
  m.categories = config.categories;
  m.instances_per_category = config.instances_per_category;
  m.size = config.size;
  m.camera = config.camera;
  m.conventions = config.conventions;
  m.sample_indices = sample_indices(config.sample_count);
  m.seed = config.seed;
  m.root = out_dir;

  for (const auto& category : config.categories)
    for (int inst = 0; inst < config.instances_per_category; ++inst)
      for (Verb verb : all_verbs()) {
        DatasetEntry e;
        e.category = category;
        e.instance = inst;
        e.model_seed = instance_seed(config.seed, inst);
        e.verb = verb;
        std::ostringstream id;
        id << category << "_" << std::setw(3) << std::setfill('0') << inst << "_" << to_string(verb);
        e.id = id.str();
        m.entries.push_back(std::move(e));
      }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + out_dir.string() + ": " + ec.message());

  const auto n = static_cast<std::ptrdiff_t>(m.entries.size());
  std::string failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    DatasetEntry& e = m.entries[static_cast<std::size_t>(i)];
    try {
      const ObjectModel model = generate_procedural(e.category, e.model_seed, categories);
      Trajectory traj;
      try {
        traj = make_trajectory(model, e.verb, mix_seed(e.model_seed ^ mix_seed(config.seed)),
                               config.conventions);
      } catch (const Error& err) {
        if (err.code() != ErrorCode::VerbNotApplicable) throw;
        e.status = std::string("skipped: ") + err.what();
        continue;
      }
      const fs::path dir = out_dir / e.id;
      fs::create_directories(dir);
      for (int k = 0; k < kTrajectoryLength; ++k) {
        const ImageRGB frame = render(model, traj.states[static_cast<std::size_t>(k)], config.camera, config.size);
        const std::string rel = e.id + "/" + frame_name(k);
        write_png((out_dir / rel).string(), frame);
        e.frames.push_back(rel);
      }
    } catch (const std::exception& ex) {
#pragma omp critical
      if (failure.empty()) failure = e.id + ": " + ex.what();
    }
  }
  if (!failure.empty()) throw Error(ErrorCode::Io, failure);

  save_manifest(m, out_dir / "manifest.json");
  return m;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << manifest.to_json().dump(1) << "\n";
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open manifest " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, path.string() + ": " + e.what());
  }
  DatasetManifest m = DatasetManifest::from_json(doc, path.parent_path());
  for (const auto& e : m.entries)
    for (const auto& f : e.frames)
      if (!fs::exists(m.root / f))
        throw Error(ErrorCode::Io, "manifest references missing frame " + (m.root / f).string());
  return m;
}

namespace {

void shuffle_split(std::vector<std::size_t> pool, double val_fraction, std::uint64_t seed, Split& out) {
  if (!(val_fraction >= 0.0 && val_fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "val_fraction must lie in [0, 1)");
  std::mt19937_64 rng(mix_seed(seed));
  std::shuffle(pool.begin(), pool.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(pool.size()) * val_fraction));
  out.train.assign(pool.begin(), pool.end() - static_cast<std::ptrdiff_t>(n_val));
  out.val.assign(pool.end() - static_cast<std::ptrdiff_t>(n_val), pool.end());
}

}  // namespace

Split split_kfold(const DatasetManifest& manifest, const std::string& test_category, double val_fraction,
                  std::uint64_t seed) {
  if (std::find(manifest.categories.begin(), manifest.categories.end(), test_category) ==
      manifest.categories.end())
    throw Error(ErrorCode::UnknownCategory, "'" + test_category + "' is not in the manifest");
  Split split;
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    if (!e.ok()) continue;
    (e.category == test_category ? split.test : pool).push_back(i);
  }
  shuffle_split(std::move(pool), val_fraction, seed, split);
  return split;
}

Split split_fixed(const DatasetManifest& manifest, const std::vector<std::string>& train_categories,
                  const std::vector<std::string>& test_categories, double val_fraction,
                  std::uint64_t seed) {
  auto known = [&](const std::string& c) {
    if (std::find(manifest.categories.begin(), manifest.categories.end(), c) == manifest.categories.end())
      throw Error(ErrorCode::UnknownCategory, "'" + c + "' is not in the manifest");
  };
  for (const auto& c : train_categories) known(c);
  for (const auto& c : test_categories) {
    known(c);
    if (std::find(train_categories.begin(), train_categories.end(), c) != train_categories.end())
      throw Error(ErrorCode::InvalidArgument, "category '" + c + "' is both train and test");
  }
  Split split;
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    if (!e.ok()) continue;
    if (std::find(test_categories.begin(), test_categories.end(), e.category) != test_categories.end())
      split.test.push_back(i);
    else if (std::find(train_categories.begin(), train_categories.end(), e.category) != train_categories.end())
      pool.push_back(i);
  }
  shuffle_split(std::move(pool), val_fraction, seed, split);
  return split;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0)
    EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

}  // namespace verbgen
