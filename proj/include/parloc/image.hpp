#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "parloc/core_types.hpp"
#include "parloc/error.hpp"
#include "parloc/text_io.hpp"

namespace parloc {

/// Row-major grayscale image with intensities in [0, 1].
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(std::size_t width, std::size_t height, double fill = 0.0)
      : width_(width), height_(height), data_(width * height, fill) {}
  GrayImage(std::size_t width, std::size_t height, std::vector<double> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != width_ * height_) {
      fail(ErrorKind::kInvalidArgument, "GrayImage: expected " + std::to_string(width_ * height_) +
                                            " values, got " + std::to_string(data_.size()));
    }
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  const std::vector<double>& data() const { return data_; }
  bool empty() const { return data_.empty(); }

  double at(std::size_t x, std::size_t y) const { return data_[y * width_ + x]; }
  double& at(std::size_t x, std::size_t y) { return data_[y * width_ + x]; }

  /// Bilinear sample; (x, y) must lie in [0, W-1] x [0, H-1].
  double bilinear(double x, double y) const {
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    std::size_t x0 = static_cast<std::size_t>(fx);
    std::size_t y0 = static_cast<std::size_t>(fy);
    double ax = x - fx;
    double ay = y - fy;
    // Clamp the upper neighbor on the last row/column (weight is zero there).
    if (x0 + 1 >= width_) {
      x0 = width_ - 1;
      ax = 0.0;
    }
    if (y0 + 1 >= height_) {
      y0 = height_ - 1;
      ay = 0.0;
    }
    const std::size_t x1 = std::min(x0 + 1, width_ - 1);
    const std::size_t y1 = std::min(y0 + 1, height_ - 1);
    const double top = (1.0 - ax) * at(x0, y0) + ax * at(x1, y0);
    const double bottom = (1.0 - ax) * at(x0, y1) + ax * at(x1, y1);
    return (1.0 - ay) * top + ay * bottom;
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> data_;
};

// --- PGM (P5) ------------------------------------------------------------------------

namespace detail {

inline std::string pgm_token(std::istream& in, const std::string& path) {
  std::string tok;
  char c = 0;
  while (in.get(c)) {
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok += c;
  }
  if (tok.empty()) fail(ErrorKind::kParse, path + ": truncated PGM header");
  return tok;
}

inline std::size_t pgm_number(std::istream& in, const std::string& path) {
  const std::string tok = pgm_token(in, path);
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    fail(ErrorKind::kParse, path + ": bad PGM header field '" + tok + "'");
  }
  return v;
}

}  // namespace detail

/// Reads a binary PGM. 8-bit and 16-bit (big-endian) samples are supported.
inline GrayImage read_pgm(std::istream& in, const std::string& path = "<pgm>") {
  if (detail::pgm_token(in, path) != "P5") fail(ErrorKind::kParse, path + ": not a binary PGM (P5)");
  const std::size_t w = detail::pgm_number(in, path);
  const std::size_t h = detail::pgm_number(in, path);
  const std::size_t maxval = detail::pgm_number(in, path);
  if (w == 0 || h == 0) fail(ErrorKind::kParse, path + ": empty PGM image");
  if (maxval == 0 || maxval > 65535) fail(ErrorKind::kParse, path + ": PGM maxval out of range");
  const std::size_t bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(w * h * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    fail(ErrorKind::kParse, path + ": truncated PGM pixel data");
  }
  std::vector<double> data(w * h);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t v = bytes == 1 ? raw[i] : (std::size_t{raw[2 * i]} << 8) | raw[2 * i + 1];
    if (v > maxval) fail(ErrorKind::kParse, path + ": PGM sample exceeds maxval");
    data[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  return GrayImage(w, h, std::move(data));
}

/// Writes an 8-bit binary PGM; values are clamped to [0, 1] and rounded.
inline void write_pgm(std::ostream& out, const GrayImage& image) {
  out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
  std::vector<unsigned char> raw(image.data().size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = std::clamp(image.data()[i], 0.0, 1.0);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

inline GrayImage load_pgm(const std::string& path) {
  auto in = open_input(path, true);
  return read_pgm(in, path);
}

inline void save_pgm(const std::string& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path + " for writing");
  write_pgm(out, image);
  if (!out) fail(ErrorKind::kIo, "failed writing " + path);
}

// --- patches -------------------------------------------------------------------------------

inline constexpr std::size_t kPatchSize = 32;
inline constexpr double kDefaultPatchCoefficient = 13.0;

struct Patch {
  std::vector<double> values;  // kPatchSize x kPatchSize, row-major

  double at(std::size_t col, std::size_t row) const { return values[row * kPatchSize + col]; }
};

/// Where keypoint patches are taken from; the descriptor is filled in later.
struct KeypointGeometry {
  Pixel pixel;
  double orientation = 0.0;
  double scale = 1.0;
};

/// True if the square of side scale*coefficient, rotated by the keypoint
/// orientation and centered on it, lies inside [0, W-1] x [0, H-1].
inline bool patch_in_bounds(const GrayImage& image, const KeypointGeometry& kp,
                            double coefficient = kDefaultPatchCoefficient) {
  if (image.empty()) return false;
  const double half = 0.5 * kp.scale * coefficient;
  const double c = std::cos(kp.orientation);
  const double s = std::sin(kp.orientation);
  const double max_x = static_cast<double>(image.width() - 1);
  const double max_y = static_cast<double>(image.height() - 1);
  for (double a : {-half, half}) {
    for (double b : {-half, half}) {
      const double x = kp.pixel.u + c * a - s * b;
      const double y = kp.pixel.v + s * a + c * b;
      if (!(x >= 0.0 && x <= max_x && y >= 0.0 && y <= max_y)) return false;
    }
  }
  return true;
}

/// Samples a kPatchSize^2 grid over the rotated square at the cell centers.
/// Patch coordinates (a, b) map to image point center + R(orientation) (a, b),
/// so an image feature at orientation theta lands axis-aligned in the patch.
inline std::optional<Patch> try_extract_patch(const GrayImage& image, const KeypointGeometry& kp,
                                              double coefficient = kDefaultPatchCoefficient) {
  if (!(kp.scale > 0.0) || !(coefficient > 0.0)) {
    fail(ErrorKind::kInvalidArgument, "extract_patch: scale and coefficient must be > 0");
  }
  if (!patch_in_bounds(image, kp, coefficient)) return std::nullopt;
  const double side = kp.scale * coefficient;
  const double c = std::cos(kp.orientation);
  const double s = std::sin(kp.orientation);
  Patch patch;
  patch.values.resize(kPatchSize * kPatchSize);
  constexpr double n = static_cast<double>(kPatchSize);
  for (std::size_t row = 0; row < kPatchSize; ++row) {
    const double b = ((static_cast<double>(row) + 0.5) / n - 0.5) * side;
    for (std::size_t col = 0; col < kPatchSize; ++col) {
      const double a = ((static_cast<double>(col) + 0.5) / n - 0.5) * side;
      const double x = std::clamp(kp.pixel.u + c * a - s * b, 0.0, static_cast<double>(image.width() - 1));
      const double y = std::clamp(kp.pixel.v + s * a + c * b, 0.0, static_cast<double>(image.height() - 1));
      patch.values[row * kPatchSize + col] = image.bilinear(x, y);
    }
  }
  return patch;
}

/// Throwing variant; out-of-bounds patches raise kGeometry.
inline Patch extract_patch(const GrayImage& image, const KeypointGeometry& kp,
                           double coefficient = kDefaultPatchCoefficient) {
  auto p = try_extract_patch(image, kp, coefficient);
  if (!p) {
    fail(ErrorKind::kGeometry, "extract_patch: patch of side " + format_number(kp.scale * coefficient) +
                                   " at (" + format_number(kp.pixel.u) + ", " +
                                   format_number(kp.pixel.v) + ") leaves the image");
  }
  return *std::move(p);
}

inline Patch extract_patch(const GrayImage& image, const QueryKeypoint& kp,
                           double coefficient = kDefaultPatchCoefficient) {
  return extract_patch(image, KeypointGeometry{kp.pixel, kp.orientation, kp.scale}, coefficient);
}

inline constexpr std::size_t kPatchDescriptorDim = (kPatchSize / 2) * (kPatchSize / 2);

/// Hand-crafted stand-in for a learned patch descriptor: 2x2 average pooling
/// (256 values), mean removal, unit normalization. Returns nullopt for a
/// patch with no contrast.
inline std::optional<RealDescriptor> patch_descriptor(const Patch& patch) {
  constexpr std::size_t h = kPatchSize / 2;
  std::vector<double> v(kPatchDescriptorDim);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < h; ++c) {
      v[r * h + c] = 0.25 * (patch.at(2 * c, 2 * r) + patch.at(2 * c + 1, 2 * r) +
                             patch.at(2 * c, 2 * r + 1) + patch.at(2 * c + 1, 2 * r + 1));
    }
  }
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double energy = 0.0;
  for (double& x : v) {
    x -= mean;
    energy += x * x;
  }
  if (!(energy > 1e-12)) return std::nullopt;
  return RealDescriptor::normalize(std::move(v));
}

}  // namespace parloc
