#include "verbgen/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>

#include <png.h>

#include "verbgen/error.hpp"

namespace verbgen {

namespace {

constexpr double kAmbient = 0.3;
constexpr double kDiffuse = 0.7;

struct CameraFrame {
  Eigen::Vector3d eye, right, up, forward;
  double focal = 0.0;  // pixels
  double cx = 0.0, cy = 0.0;
};

CameraFrame make_frame(const CameraConfig& c, ImageSize size) {
  CameraFrame f;
  f.eye = c.eye;
  f.forward = (c.look_at - c.eye).normalized();
  f.right = f.forward.cross(c.up).normalized();
  f.up = f.right.cross(f.forward);
  f.focal = 0.5 * size.height / std::tan(0.5 * c.vertical_fov);
  f.cx = 0.5 * size.width;
  f.cy = 0.5 * size.height;
  return f;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Sutherland-Hodgman against z >= near; a triangle yields at most a quad.
int clip_near(const std::array<Eigen::Vector3d, 3>& in, double near, std::array<Eigen::Vector3d, 4>& out) {
  int n = 0;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3d& a = in[i];
    const Eigen::Vector3d& b = in[(i + 1) % 3];
    const bool a_in = a.z() >= near;
    const bool b_in = b.z() >= near;
    if (a_in) out[n++] = a;
    if (a_in != b_in) {
      const double t = (near - a.z()) / (b.z() - a.z());
      out[n++] = a + t * (b - a);
    }
  }
  return n;
}

class Rasterizer {
 public:
  Rasterizer(ImageRGB& image, const CameraFrame& frame, double far)
      : image_(image), frame_(frame), far_(far),
        depth_(static_cast<std::size_t>(image.width) * image.height,
               std::numeric_limits<double>::infinity()) {}

  void triangle(const std::array<Eigen::Vector3d, 3>& cam, const std::array<std::uint8_t, 3>& rgb,
                double near) {
    std::array<Eigen::Vector3d, 4> poly;
    const int n = clip_near(cam, near, poly);
    for (int k = 1; k + 1 < n; ++k) raster({poly[0], poly[k], poly[k + 1]}, rgb);
  }

 private:
  void raster(const std::array<Eigen::Vector3d, 3>& v, const std::array<std::uint8_t, 3>& rgb) {
    std::array<double, 3> sx, sy, inv_z;
    for (int i = 0; i < 3; ++i) {
      inv_z[i] = 1.0 / v[i].z();
      sx[i] = frame_.cx + frame_.focal * v[i].x() * inv_z[i];
      sy[i] = frame_.cy - frame_.focal * v[i].y() * inv_z[i];
    }
    const double area = (sx[1] - sx[0]) * (sy[2] - sy[0]) - (sx[2] - sx[0]) * (sy[1] - sy[0]);
    if (area == 0.0 || !std::isfinite(area)) return;

    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({sx[0], sx[1], sx[2]}))));
    const int x1 = std::min(image_.width - 1, static_cast<int>(std::ceil(std::max({sx[0], sx[1], sx[2]}))));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({sy[0], sy[1], sy[2]}))));
    const int y1 = std::min(image_.height - 1, static_cast<int>(std::ceil(std::max({sy[0], sy[1], sy[2]}))));

    for (int y = y0; y <= y1; ++y) {
      const double py = y + 0.5;
      for (int x = x0; x <= x1; ++x) {
        const double px = x + 0.5;
        double w0 = (sx[2] - sx[1]) * (py - sy[1]) - (sy[2] - sy[1]) * (px - sx[1]);
        double w1 = (sx[0] - sx[2]) * (py - sy[2]) - (sy[0] - sy[2]) * (px - sx[2]);
        double w2 = (sx[1] - sx[0]) * (py - sy[0]) - (sy[1] - sy[0]) * (px - sx[0]);
        if (area < 0.0) {
          w0 = -w0;
          w1 = -w1;
          w2 = -w2;
        }
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        const double norm = std::abs(area);
        const double iz = (w0 * inv_z[0] + w1 * inv_z[1] + w2 * inv_z[2]) / norm;
        const double z = 1.0 / iz;
        if (z > far_) continue;
        double& d = depth_[static_cast<std::size_t>(y) * image_.width + x];
        if (z >= d) continue;
        d = z;
        std::uint8_t* p = image_.at(x, y);
        p[0] = rgb[0];
        p[1] = rgb[1];
        p[2] = rgb[2];
      }
    }
  }

  ImageRGB& image_;
  const CameraFrame& frame_;
  double far_;
  std::vector<double> depth_;
};

// Corner index bits: x = bit 0, y = bit 1, z = bit 2.
constexpr std::array<std::array<int, 4>, 6> kFaces{{
    {1, 3, 7, 5},  // +x
    {0, 4, 6, 2},  // -x
    {2, 6, 7, 3},  // +y
    {0, 1, 5, 4},  // -y
    {4, 5, 7, 6},  // +z
    {0, 2, 3, 1},  // -z
}};

const std::array<Eigen::Vector3d, 6> kFaceNormals{
    Eigen::Vector3d::UnitX(), -Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(),
    -Eigen::Vector3d::UnitY(), Eigen::Vector3d::UnitZ(), -Eigen::Vector3d::UnitZ()};

}  // namespace

void CameraConfig::validate() const {
  if (!(near_plane > 0.0 && near_plane < far_plane))
    throw Error(ErrorCode::InvalidCamera, "need 0 < near < far");
  if (!(vertical_fov > 0.0 && vertical_fov < 3.14159265358979323846))
    throw Error(ErrorCode::InvalidCamera, "vertical_fov must lie in (0, pi)");
  const Eigen::Vector3d view = look_at - eye;
  if (view.norm() == 0.0) throw Error(ErrorCode::InvalidCamera, "eye equals look_at");
  if (view.normalized().cross(up.normalized()).norm() < 1e-9)
    throw Error(ErrorCode::InvalidCamera, "up is parallel to the view direction");
  if (std::abs(light_direction.norm() - 1.0) > 1e-9)
    throw Error(ErrorCode::InvalidCamera, "light_direction must be unit length");
}

ImageRGB render_empty(const CameraConfig& camera, ImageSize size) {
  if (size.width <= 0 || size.height <= 0)
    throw Error(ErrorCode::InvalidImageSize,
                std::to_string(size.width) + "x" + std::to_string(size.height));
  ImageRGB image(size.width, size.height);
  const std::array<std::uint8_t, 3> bg{to_byte(camera.background.x()), to_byte(camera.background.y()),
                                       to_byte(camera.background.z())};
  for (std::size_t i = 0; i < image.pixels.size(); i += 3)
    std::copy(bg.begin(), bg.end(), image.pixels.begin() + static_cast<std::ptrdiff_t>(i));
  return image;
}

ImageRGB render(const ObjectModel& model, const ObjectState& state, const CameraConfig& camera,
                ImageSize size) {
  camera.validate();
  ImageRGB image = render_empty(camera, size);
  const auto world = link_transforms(model, state);
  if (!state.present) return image;

  const CameraFrame frame = make_frame(camera, size);
  Rasterizer raster(image, frame, camera.far_plane);

  for (std::size_t li = 0; li < model.links().size(); ++li) {
    const Link& link = model.links()[li];
    const Eigen::Isometry3d t = world[li] * link.visual_origin.to_isometry();

    std::array<Eigen::Vector3d, 8> cam;
    for (int c = 0; c < 8; ++c) {
      const Eigen::Vector3d local((c & 1) ? link.half_extents.x() : -link.half_extents.x(),
                                  (c & 2) ? link.half_extents.y() : -link.half_extents.y(),
                                  (c & 4) ? link.half_extents.z() : -link.half_extents.z());
      const Eigen::Vector3d d = t * local - frame.eye;
      cam[c] = {d.dot(frame.right), d.dot(frame.up), d.dot(frame.forward)};
    }
    for (std::size_t f = 0; f < kFaces.size(); ++f) {
      const Eigen::Vector3d normal = t.linear() * kFaceNormals[f];
      const double shade = kAmbient + kDiffuse * std::max(0.0, normal.dot(camera.light_direction));
      const std::array<std::uint8_t, 3> rgb{to_byte(link.color.x() * shade), to_byte(link.color.y() * shade),
                                            to_byte(link.color.z() * shade)};
      const auto& q = kFaces[f];
      raster.triangle({cam[q[0]], cam[q[1]], cam[q[2]]}, rgb, camera.near_plane);
      raster.triangle({cam[q[0]], cam[q[2]], cam[q[3]]}, rgb, camera.near_plane);
    }
  }
  return image;
}

std::vector<ImageRGB> render_trajectory(const ObjectModel& model,
                                        std::span<const ObjectState> states,
                                        const CameraConfig& camera, ImageSize size) {
  if (states.empty()) throw Error(ErrorCode::EmptySequence, "no states to render");
  std::vector<ImageRGB> frames;
  frames.reserve(states.size());
  for (const ObjectState& s : states) frames.push_back(render(model, s, camera, size));
  return frames;
}

// ---------------------------------------------------------------------------
// PNG through libpng

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const std::string& path, const ImageRGB& image) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error(ErrorCode::Io, "cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorCode::Io, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::Io, "libpng failed writing " + path);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y)
    png_write_row(png, const_cast<png_bytep>(image.at(0, y)));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageRGB read_png(const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw Error(ErrorCode::Io, "cannot read " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error(ErrorCode::Io, "libpng initialisation failed");
  }
  ImageRGB image;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::Io, "libpng failed reading " + path);
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  image = ImageRGB(static_cast<int>(png_get_image_width(png, info)),
                   static_cast<int>(png_get_image_height(png, info)));
  for (int y = 0; y < image.height; ++y) png_read_row(png, image.at(0, y), nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

void write_raw_rgb(const std::string& path, const ImageRGB& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  auto put_u32 = [&](std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
  };
  put_u32(static_cast<std::uint32_t>(image.width));
  put_u32(static_cast<std::uint32_t>(image.height));
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path);
}

ImageRGB read_raw_rgb(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  unsigned char hdr[8];
  if (!in.read(reinterpret_cast<char*>(hdr), 8)) throw Error(ErrorCode::Truncated, path);
  auto u32 = [&](int o) {
    return static_cast<std::uint32_t>(hdr[o]) | (static_cast<std::uint32_t>(hdr[o + 1]) << 8) |
           (static_cast<std::uint32_t>(hdr[o + 2]) << 16) | (static_cast<std::uint32_t>(hdr[o + 3]) << 24);
  };
  ImageRGB image(static_cast<int>(u32(0)), static_cast<int>(u32(4)));
  if (!in.read(reinterpret_cast<char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size())))
    throw Error(ErrorCode::Truncated, path);
  return image;
}

}  // namespace verbgen
