#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "parloc/error.hpp"

namespace parloc {

using LandmarkId = std::uint64_t;
using FrameId = std::uint64_t;

// Norm deviations up to this are silently renormalized on ingest; larger
// deviations indicate corrupt data and are rejected.
inline constexpr double kRenormalizeTolerance = 1e-2;
// Below this deviation the stored values are kept bit-for-bit.
inline constexpr double kUnitNormExact = 1e-9;

namespace detail {

inline double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace detail

/// A finite, unit-length real vector. The tag distinguishes local feature
/// descriptors from whole-image descriptors at the type level.
template <class Tag>
class UnitVector {
 public:
  UnitVector() = default;

  /// Ingest rule: values within kUnitNormExact of unit length are kept as-is,
  /// values within kRenormalizeTolerance are renormalized, anything else
  /// (including non-finite values) is rejected.
  explicit UnitVector(std::vector<double> values) : values_(std::move(values)) {
    for (double x : values_) {
      if (!std::isfinite(x)) fail(ErrorKind::kParse, "descriptor has a non-finite value");
    }
    const double norm = std::sqrt(detail::squared_norm(values_));
    const double dev = std::abs(norm - 1.0);
    if (dev > kRenormalizeTolerance) {
      fail(ErrorKind::kParse, "descriptor norm " + std::to_string(norm) +
                                  " is not close to 1");
    }
    if (dev > kUnitNormExact) {
      for (double& x : values_) x /= norm;
    }
  }

  /// Scales any nonzero finite vector to unit length.
  static UnitVector normalize(std::vector<double> values) {
    const double norm = std::sqrt(detail::squared_norm(values));
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      fail(ErrorKind::kInvalidArgument, "cannot normalize a zero or non-finite vector");
    }
    for (double& x : values) x /= norm;
    UnitVector out;
    out.values_ = std::move(values);
    return out;
  }

  std::span<const double> values() const { return values_; }
  operator std::span<const double>() const { return values_; }  // NOLINT
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }

  friend bool operator==(const UnitVector&, const UnitVector&) = default;

 private:
  std::vector<double> values_;
};

struct LocalTag {};
struct GlobalTag {};

using RealDescriptor = UnitVector<LocalTag>;
using GlobalDescriptor = UnitVector<GlobalTag>;

/// Sign-binarized descriptor, packed 64 bits per word. Padding bits are zero.
class BinaryDescriptor {
 public:
  BinaryDescriptor() = default;
  explicit BinaryDescriptor(std::size_t dim)
      : dim_(dim), words_((dim + 63) / 64, 0) {}

  std::size_t size() const { return dim_; }

  bool bit(std::size_t k) const { return (words_[k / 64] >> (k % 64)) & 1u; }

  void set(std::size_t k, bool value) {
    const std::uint64_t mask = std::uint64_t{1} << (k % 64);
    if (value) {
      words_[k / 64] |= mask;
    } else {
      words_[k / 64] &= ~mask;
    }
  }

  std::size_t popcount() const {
    std::size_t n = 0;
    for (std::uint64_t w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  std::span<const std::uint64_t> words() const { return words_; }

  friend bool operator==(const BinaryDescriptor&, const BinaryDescriptor&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<std::uint64_t> words_;
};

// --- distances -------------------------------------------------------------

inline double l2_distance(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "l2_distance");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

/// bit k is set iff values[k] >= 0 (zero binarizes to 1).
inline BinaryDescriptor binarize(std::span<const double> values) {
  BinaryDescriptor out(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) out.set(k, values[k] >= 0.0);
  return out;
}

inline std::size_t hamming_distance(const BinaryDescriptor& a, const BinaryDescriptor& b) {
  require_same_dim(a.size(), b.size(), "hamming_distance");
  std::size_t n = 0;
  const auto wa = a.words();
  const auto wb = b.words();
  for (std::size_t i = 0; i < wa.size(); ++i) {
    n += static_cast<std::size_t>(std::popcount(wa[i] ^ wb[i]));
  }
  return n;
}

/// sqrt(sum_k (a_k - b_k)^2 * m_k) where m_k is 1 when the sign bits of a_k
/// and b_k differ. Dimensions whose signs agree contribute nothing.
inline double weighted_hamming_distance(std::span<const double> a,
                                        std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "weighted_hamming_distance");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if ((a[k] >= 0.0) != (b[k] >= 0.0)) {
      const double d = a[k] - b[k];
      s += d * d;
    }
  }
  return std::sqrt(s);
}

// --- records -----------------------------------------------------------------

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

struct DescriptorPair {
  RealDescriptor real;
  BinaryDescriptor binary;

  static DescriptorPair from_real(RealDescriptor r) {
    BinaryDescriptor b = binarize(r);
    return {std::move(r), std::move(b)};
  }
};

struct LandmarkRecord {
  LandmarkId id = 0;
  Vec3 position;
  std::vector<DescriptorPair> descriptors;
  std::vector<FrameId> observing_frames;  // sorted, unique
};

struct FrameRecord {
  FrameId id = 0;
  GlobalDescriptor global_descriptor;
  std::vector<LandmarkId> visible_landmarks;  // file order, unique
};

struct Pixel {
  double u = 0.0, v = 0.0;
};

struct QueryKeypoint {
  Pixel pixel;
  double orientation = 0.0;  // radians
  double scale = 1.0;        // pixels
  DescriptorPair descriptor;
};

}  // namespace parloc
