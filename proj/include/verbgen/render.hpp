#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "verbgen/kinematics.hpp"

namespace verbgen {

/// Row-major 8-bit RGB raster.
struct ImageRGB {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  ImageRGB() = default;
  ImageRGB(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t* at(int x, int y) { return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  bool operator==(const ImageRGB&) const = default;
};

struct ImageSize {
  int width = 64;
  int height = 64;
  bool operator==(const ImageSize&) const = default;
};

struct CameraConfig {
  Eigen::Vector3d eye{2.5, 0.0, 1.2};
  Eigen::Vector3d look_at = Eigen::Vector3d::Zero();
  Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  double vertical_fov = 50.0 * 3.14159265358979323846 / 180.0;
  double near_plane = 0.05;
  double far_plane = 50.0;
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  /// Unit vector pointing towards the light.
  Eigen::Vector3d light_direction = Eigen::Vector3d(2.0, 1.0, 2.0) / 3.0;

  /// Throws Error(InvalidCamera) when an invariant is violated.
  void validate() const;
};

/// Flat-shaded, z-buffered pinhole rendering of every link cuboid.
ImageRGB render(const ObjectModel& model, const ObjectState& state, const CameraConfig& camera,
                ImageSize size);

/// The image `render` produces when no object is present.
ImageRGB render_empty(const CameraConfig& camera, ImageSize size);

std::vector<ImageRGB> render_trajectory(const ObjectModel& model,
                                        std::span<const ObjectState> states,
                                        const CameraConfig& camera, ImageSize size);

void write_png(const std::string& path, const ImageRGB& image);
ImageRGB read_png(const std::string& path);

/// Raw dump: width and height as little-endian u32, then the pixel bytes.
void write_raw_rgb(const std::string& path, const ImageRGB& image);
ImageRGB read_raw_rgb(const std::string& path);

}  // namespace verbgen
