#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "verbgen/error.hpp"
#include "verbgen/nn/train.hpp"

// File layout, all little-endian:
//   8 bytes  magic "VGCNNMDL"
//   u32      format version
//   8 x i32  frames, height, width, conv1, conv2, dense1, dense2, classes
//   u64      parameter count
//   f64[]    parameters in param_layout order

namespace verbgen::nn {

namespace {

constexpr std::array<char, 8> kMagic{'V', 'G', 'C', 'N', 'N', 'M', 'D', 'L'};
constexpr std::uint32_t kVersion = 1;

template <typename U>
void put(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& buf;
  std::size_t at = 0;

  template <typename U>
  U get() {
    if (buf.size() - at < sizeof(U)) throw Error(ErrorCode::Truncated, "model file ends early");
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
    at += sizeof(U);
    return v;
  }
};

}  // namespace

void save_model(const CnnModel& model, const std::string& path) {
  model.arch.validate();
  std::string out(kMagic.begin(), kMagic.end());
  put<std::uint32_t>(out, kVersion);
  const Architecture& a = model.arch;
  for (int v : {a.frames, a.height, a.width, a.conv1, a.conv2, a.dense1, a.dense2, a.classes})
    put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  put<std::uint64_t>(out, model.params.size());
  for (double p : model.params) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(p));

  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(ErrorCode::Io, "short write to " + path);
}

CnnModel load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path);
  const std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (buf.size() < kMagic.size() || std::memcmp(buf.data(), kMagic.data(), kMagic.size()) != 0)
    throw Error(ErrorCode::BadMagic, path + " is not a model file");
  Reader r{buf, kMagic.size()};
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion)
    throw Error(ErrorCode::VersionMismatch,
                "model format version " + std::to_string(version) + ", expected " + std::to_string(kVersion));
  Architecture a;
  for (int* v : {&a.frames, &a.height, &a.width, &a.conv1, &a.conv2, &a.dense1, &a.dense2, &a.classes})
    *v = static_cast<int>(r.get<std::uint32_t>());
  CnnModel m(a);
  const auto count = r.get<std::uint64_t>();
  if (count != m.params.size())
    throw Error(ErrorCode::ShapeMismatch, "parameter count " + std::to_string(count) + " does not match the architecture");
  for (double& p : m.params) p = std::bit_cast<double>(r.get<std::uint64_t>());
  if (r.at != buf.size()) throw Error(ErrorCode::ShapeMismatch, "trailing bytes after parameters");
  return m;
}

}  // namespace verbgen::nn
