#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "verbgen/nn/train.hpp"
#include "verbgen/procedural.hpp"
#include "verbgen/render.hpp"
#include "verbgen/verbs.hpp"

namespace fixtures {

namespace fs = std::filesystem;

/// Fresh, empty scratch directory under the system temp dir.
inline fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "verbgen_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

inline std::string read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const fs::path& p, const std::string& data) {
  std::ofstream f(p, std::ios::binary);
  f << data;
}

/// n rendered trajectories, label i % 15, cycling through the built-in
/// categories with a distinct procedural instance per sample.
inline verbgen::nn::SampleSet overfit_samples(int n, int size, int frames) {
  using namespace verbgen;
  const auto cats = CategoryConfig::builtin().names();
  nn::SampleSet set;
  set.frames = frames;
  set.height = set.width = size;
  const CameraConfig camera;
  for (int i = 0; i < n; ++i) {
    const ObjectModel m = generate_procedural(cats[static_cast<std::size_t>(i) % cats.size()], 1000 + i);
    const Verb v = verb_from_index(i % kNumVerbs);
    const auto traj = make_trajectory(m, v, static_cast<std::uint64_t>(i));
    const auto all = traj.render_frames(m, camera, {size, size});
    set.add(sample_frames(all, frames), class_index(v), "s" + std::to_string(i));
  }
  return set;
}

inline verbgen::nn::Architecture arch_for(const verbgen::nn::SampleSet& s) {
  verbgen::nn::Architecture a;
  a.frames = s.frames;
  a.height = s.height;
  a.width = s.width;
  return a;
}

}  // namespace fixtures
