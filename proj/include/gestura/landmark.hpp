#pragma once

// Relative landmark encoding: the geometric core that turns 21 hand keypoints
// into 1024 triplet-angle cosines.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gestura/error.hpp"

namespace gestura {

inline constexpr std::size_t kLandmarkCount = 21;
inline constexpr std::size_t kTripletCount = 1330;  // C(21, 3)
inline constexpr std::size_t kLandmarkFeatureDim = 1024;
/// Coincident-point threshold for the angle computation.
inline constexpr double kDegenerateEpsilon = 1e-8;

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend constexpr Point3 operator-(const Point3& a, const Point3& b) noexcept {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
  }
  friend constexpr bool operator==(const Point3&, const Point3&) = default;
};

constexpr double dot(const Point3& a, const Point3& b) noexcept {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline bool is_finite(const Point3& p) noexcept {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

enum class Handedness { left, right, unknown };

constexpr std::string_view to_string(Handedness h) noexcept {
  switch (h) {
    case Handedness::left: return "left";
    case Handedness::right: return "right";
    case Handedness::unknown: return "unknown";
  }
  return "unknown";
}

struct HandLandmarkFrame {
  std::array<Point3, kLandmarkCount> points{};
  Handedness handedness = Handedness::unknown;
  bool valid = false;
  std::uint32_t frame_index = 0;
};

struct Triplet {
  std::uint8_t i = 0;
  std::uint8_t j = 0;
  std::uint8_t k = 0;

  friend constexpr bool operator==(const Triplet&, const Triplet&) = default;
};

struct LandmarkFeatureVector {
  std::array<double, kLandmarkFeatureDim> values{};
  bool valid = false;
  /// Number of triplets whose vertex coincided with another point.
  std::uint32_t degenerate_count = 0;
};

/// Euclidean distance. Throws InvalidInput on non-finite coordinates.
inline double pairwise_distance(const Point3& a, const Point3& b) {
  if (!is_finite(a) || !is_finite(b)) {
    throw InvalidInput("pairwise_distance: non-finite coordinate");
  }
  const Point3 d = a - b;
  return std::sqrt(dot(d, d));
}

struct TripletCosine {
  double value = 0.0;
  bool degenerate = false;
};

/// Cosine of the angle at `vertex` between the rays to `a` and `b`.
/// Degenerate (a ray shorter than kDegenerateEpsilon) yields 0 with the flag
/// set; the result is clamped to [-1, 1].
inline TripletCosine triplet_cosine(const Point3& vertex, const Point3& a, const Point3& b) {
  if (!is_finite(vertex) || !is_finite(a) || !is_finite(b)) {
    throw InvalidInput("triplet_cosine: non-finite coordinate");
  }
  const Point3 u = a - vertex;
  const Point3 v = b - vertex;
  const double du = std::sqrt(dot(u, u));
  const double dv = std::sqrt(dot(v, v));
  if (du < kDegenerateEpsilon || dv < kDegenerateEpsilon) return {0.0, true};
  return {std::clamp(dot(u, v) / (du * dv), -1.0, 1.0), false};
}

/// All C(n, 3) index triplets i < j < k in lexicographic order.
inline std::vector<Triplet> enumerate_triplets(std::size_t n) {
  if (n < 3) throw InvalidInput("enumerate_triplets: need at least 3 landmarks");
  if (n > 255) throw InvalidInput("enumerate_triplets: at most 255 landmarks");
  std::vector<Triplet> out;
  out.reserve(n * (n - 1) * (n - 2) / 6);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k)
        out.push_back({static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(j),
                       static_cast<std::uint8_t>(k)});
  return out;
}

/// The lexicographic prefix of enumerate_triplets(21) used by the encoder.
inline std::span<const Triplet, kLandmarkFeatureDim> encoder_triplets() {
  static const std::vector<Triplet> all = enumerate_triplets(kLandmarkCount);
  return std::span<const Triplet, kLandmarkFeatureDim>(all.data(), kLandmarkFeatureDim);
}

/// Relative landmark encoding of one frame. An invalid frame (no hand) maps to
/// the all-zero vector with valid = false so the frame count stays fixed.
inline LandmarkFeatureVector encode_landmarks(const HandLandmarkFrame& frame) {
  LandmarkFeatureVector out;
  if (!frame.valid) return out;
  for (const auto& p : frame.points) {
    if (!is_finite(p)) throw InvalidInput("encode_landmarks: non-finite coordinate");
  }
  const auto triplets = encoder_triplets();
  for (std::size_t t = 0; t < triplets.size(); ++t) {
    const auto& tr = triplets[t];
    const auto c = triplet_cosine(frame.points[tr.i], frame.points[tr.j], frame.points[tr.k]);
    out.values[t] = c.value;
    out.degenerate_count += c.degenerate ? 1 : 0;
  }
  out.valid = true;
  return out;
}

}  // namespace gestura
