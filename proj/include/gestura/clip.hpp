#pragma once

// Clip geometry: frame sampling, crop rectangle, and per-frame token assembly
// (257 vision tokens + 1 landmark token).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gestura/error.hpp"
#include "gestura/landmark.hpp"
#include "gestura/matrix.hpp"
#include "json.hpp"

namespace gestura {

inline constexpr std::size_t kFramesPerClip = 8;
inline constexpr std::size_t kVisionTokens = 257;
inline constexpr std::size_t kTokensPerFrame = kVisionTokens + 1;
inline constexpr std::size_t kTokenDim = 1024;
inline constexpr int kCropSide = 224;

enum class View { egocentric, exocentric };

constexpr std::string_view to_string(View v) noexcept {
  return v == View::egocentric ? "egocentric" : "exocentric";
}

inline std::optional<View> parse_view(std::string_view s) noexcept {
  if (s == "egocentric") return View::egocentric;
  if (s == "exocentric") return View::exocentric;
  return std::nullopt;
}

struct ClipMeta {
  std::string clip_id;
  std::uint32_t n_frames = 1;
  std::uint32_t width = 1;
  std::uint32_t height = 1;
  double fps = 0.0;
  View view = View::exocentric;
  std::optional<std::string> class_label;
};

/// Midpoint rule: index i = floor((i + 0.5) * n_frames / k). Short clips
/// repeat frames.
inline std::vector<std::uint32_t> sample_frame_indices(std::uint32_t n_frames,
                                                       std::uint32_t k = kFramesPerClip) {
  if (n_frames == 0) throw InvalidInput("sample_frame_indices: n_frames must be >= 1");
  if (k == 0) throw InvalidInput("sample_frame_indices: k must be >= 1");
  std::vector<std::uint32_t> out(k);
  for (std::uint64_t i = 0; i < k; ++i) {
    out[i] = static_cast<std::uint32_t>(((2 * i + 1) * n_frames) / (2 * std::uint64_t{k}));
  }
  return out;
}

struct CropGeometry {
  double scale = 1.0;
  double scaled_width = 0.0;
  double scaled_height = 0.0;
  int x = 0;  ///< left edge of the crop in scaled coordinates
  int y = 0;
  int side = kCropSide;
};

/// Resize so the short side equals `side`, then take the centred square.
/// Offsets are rounded to the nearest pixel.
inline CropGeometry center_crop_geometry(std::uint32_t width, std::uint32_t height,
                                         int side = kCropSide) {
  if (width == 0 || height == 0 || side <= 0) {
    throw InvalidInput("center_crop_geometry: dimensions must be positive");
  }
  CropGeometry g;
  g.side = side;
  g.scale = static_cast<double>(side) / static_cast<double>(std::min(width, height));
  g.scaled_width = width * g.scale;
  g.scaled_height = height * g.scale;
  g.x = static_cast<int>(std::lround((g.scaled_width - side) / 2.0));
  g.y = static_cast<int>(std::lround((g.scaled_height - side) / 2.0));
  return g;
}

/// Appends the landmark vector as the last token row.
template <typename T>
Matrix<T> assemble_frame_tokens(const Matrix<T>& vision_tokens,
                                const LandmarkFeatureVector& landmarks) {
  if (vision_tokens.rows() != kVisionTokens || vision_tokens.cols() != kTokenDim) {
    throw InvalidInput("assemble_frame_tokens: vision tokens must be 257 x 1024, got " +
                       std::to_string(vision_tokens.rows()) + " x " +
                       std::to_string(vision_tokens.cols()));
  }
  Matrix<T> out(kTokensPerFrame, kTokenDim);
  const auto src = vision_tokens.flat();
  std::copy(src.begin(), src.end(), out.flat().begin());
  auto last = out.row(kVisionTokens);
  for (std::size_t c = 0; c < kTokenDim; ++c) last[c] = static_cast<T>(landmarks.values[c]);
  return out;
}

/// [frame][token][dim] tensor for one clip.
template <typename T>
struct TokenBlock {
  std::size_t n_frames = 0;
  std::size_t tokens = 0;
  std::size_t dim = 0;
  std::vector<T> data;

  std::span<const T> frame(std::size_t f) const {
    return {data.data() + f * tokens * dim, tokens * dim};
  }
  std::span<const T> token(std::size_t f, std::size_t t) const {
    return {data.data() + (f * tokens + t) * dim, dim};
  }
};

/// Assemble all frames of a clip into an 8 x 258 x 1024 block.
template <typename T>
TokenBlock<T> assemble_clip_tokens(std::span<const Matrix<T>> vision,
                                   std::span<const LandmarkFeatureVector> landmarks) {
  if (vision.size() != kFramesPerClip || landmarks.size() != kFramesPerClip) {
    throw InvalidInput("assemble_clip_tokens: expected 8 frames of vision tokens and landmarks");
  }
  TokenBlock<T> block{kFramesPerClip, kTokensPerFrame, kTokenDim, {}};
  block.data.reserve(kFramesPerClip * kTokensPerFrame * kTokenDim);
  for (std::size_t f = 0; f < kFramesPerClip; ++f) {
    const auto frame = assemble_frame_tokens(vision[f], landmarks[f]);
    block.data.insert(block.data.end(), frame.flat().begin(), frame.flat().end());
  }
  return block;
}

/// Clip manifest: {clip_id, n_frames, width, height, fps, view, class_label}.
inline ClipMeta clip_meta_from_json(const nlohmann::json& j, const std::string& where = "") {
  auto path = [&](const char* field) { return where.empty() ? std::string(field) : where + "." + field; };
  if (!j.is_object()) throw FormatError(where, "clip manifest is not an object");
  ClipMeta m;
  if (!j.contains("clip_id") || !j["clip_id"].is_string()) throw FormatError(path("clip_id"), "missing or not a string");
  m.clip_id = j["clip_id"].get<std::string>();
  auto positive = [&](const char* field) -> std::uint32_t {
    if (!j.contains(field) || !j[field].is_number_unsigned() || j[field].get<std::uint64_t>() == 0 ||
        j[field].get<std::uint64_t>() > 0xffffffffULL)
      throw FormatError(path(field), "missing or not a positive integer");
    return j[field].get<std::uint32_t>();
  };
  m.n_frames = positive("n_frames");
  m.width = positive("width");
  m.height = positive("height");
  if (j.contains("fps")) {
    if (!j["fps"].is_number()) throw FormatError(path("fps"), "not a number");
    m.fps = j["fps"].get<double>();
  }
  if (!j.contains("view") || !j["view"].is_string() || !parse_view(j["view"].get<std::string>()))
    throw FormatError(path("view"), "must be egocentric or exocentric");
  m.view = *parse_view(j["view"].get<std::string>());
  if (j.contains("class_label") && !j["class_label"].is_null()) {
    if (!j["class_label"].is_string()) throw FormatError(path("class_label"), "not a string");
    m.class_label = j["class_label"].get<std::string>();
  }
  return m;
}

inline nlohmann::json to_json(const ClipMeta& m) {
  nlohmann::json j{{"clip_id", m.clip_id}, {"n_frames", m.n_frames}, {"width", m.width},
                   {"height", m.height}, {"fps", m.fps}, {"view", std::string(to_string(m.view))}};
  j["class_label"] = m.class_label ? nlohmann::json(*m.class_label) : nlohmann::json(nullptr);
  return j;
}

}  // namespace gestura
