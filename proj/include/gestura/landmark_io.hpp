#pragma once

// Landmark file format produced by the hand-tracking extractor:
//   {clip_id, fps, frames: [{frame_index, handedness, valid, points: [[x,y,z] x 21]}]}
// A frame_index may appear twice when two hands were reported.

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gestura/error.hpp"
#include "gestura/landmark.hpp"
#include "json.hpp"

namespace gestura {

struct LandmarkClip {
  std::string clip_id;
  double fps = 0.0;
  std::vector<HandLandmarkFrame> frames;
};

enum class HandSelection { first, left, right };

struct FormatViolation {
  std::string path;
  std::string message;
};

namespace detail {

inline bool parse_handedness(const nlohmann::json& j, Handedness& out) {
  if (!j.is_string()) return false;
  const auto& s = j.get_ref<const std::string&>();
  if (s == "left") out = Handedness::left;
  else if (s == "right") out = Handedness::right;
  else if (s == "unknown") out = Handedness::unknown;
  else return false;
  return true;
}

}  // namespace detail

/// Every way `doc` departs from the landmark file format. Empty means loadable.
inline std::vector<FormatViolation> landmark_file_violations(const nlohmann::json& doc) {
  std::vector<FormatViolation> out;
  auto add = [&](std::string path, std::string msg) { out.push_back({std::move(path), std::move(msg)}); };
  if (!doc.is_object()) {
    add("", "document is not an object");
    return out;
  }
  if (!doc.contains("clip_id") || !doc["clip_id"].is_string()) add("clip_id", "missing or not a string");
  if (!doc.contains("fps") || !doc["fps"].is_number() || !(doc["fps"].get<double>() > 0.0))
    add("fps", "missing or not a positive number");
  if (!doc.contains("frames") || !doc["frames"].is_array()) {
    add("frames", "missing or not an array");
    return out;
  }
  const auto& frames = doc["frames"];
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& fr = frames[f];
    const std::string base = "frames[" + std::to_string(f) + "]";
    if (!fr.is_object()) {
      add(base, "not an object");
      continue;
    }
    if (!fr.contains("frame_index") || !fr["frame_index"].is_number_unsigned())
      add(base + ".frame_index", "missing or not a non-negative integer");
    Handedness h;
    if (!fr.contains("handedness") || !detail::parse_handedness(fr["handedness"], h))
      add(base + ".handedness", "must be one of left, right, unknown");
    if (!fr.contains("valid") || !fr["valid"].is_boolean()) {
      add(base + ".valid", "missing or not a boolean");
      continue;
    }
    if (!fr["valid"].get<bool>()) continue;
    if (!fr.contains("points") || !fr["points"].is_array() || fr["points"].size() != kLandmarkCount) {
      add(base + ".points", "valid frame needs exactly 21 points");
      continue;
    }
    for (std::size_t p = 0; p < kLandmarkCount; ++p) {
      const auto& pt = fr["points"][p];
      bool ok = pt.is_array() && pt.size() == 3;
      for (std::size_t c = 0; ok && c < 3; ++c)
        ok = pt[c].is_number() && std::isfinite(pt[c].get<double>());
      if (!ok) add(base + ".points[" + std::to_string(p) + "]", "expected three finite numbers");
    }
  }
  return out;
}

/// Throws FormatError naming the first violation.
inline LandmarkClip landmark_clip_from_json(const nlohmann::json& doc) {
  if (auto v = landmark_file_violations(doc); !v.empty()) {
    throw FormatError(v.front().path, v.front().message);
  }
  LandmarkClip clip;
  clip.clip_id = doc["clip_id"].get<std::string>();
  clip.fps = doc["fps"].get<double>();
  for (const auto& fr : doc["frames"]) {
    HandLandmarkFrame frame;
    frame.frame_index = fr["frame_index"].get<std::uint32_t>();
    detail::parse_handedness(fr["handedness"], frame.handedness);
    frame.valid = fr["valid"].get<bool>();
    if (frame.valid) {
      for (std::size_t p = 0; p < kLandmarkCount; ++p) {
        const auto& pt = fr["points"][p];
        frame.points[p] = {pt[0].get<double>(), pt[1].get<double>(), pt[2].get<double>()};
      }
    }
    clip.frames.push_back(frame);
  }
  return clip;
}

inline nlohmann::json to_json(const LandmarkClip& clip) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : clip.frames) {
    nlohmann::json pts = nlohmann::json::array();
    if (f.valid)
      for (const auto& p : f.points) pts.push_back({p.x, p.y, p.z});
    frames.push_back({{"frame_index", f.frame_index},
                      {"handedness", std::string(to_string(f.handedness))},
                      {"valid", f.valid},
                      {"points", std::move(pts)}});
  }
  return {{"clip_id", clip.clip_id}, {"fps", clip.fps}, {"frames", std::move(frames)}};
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path, "cannot open file");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path, std::string("malformed JSON: ") + e.what());
  }
}

inline LandmarkClip read_landmark_file(const std::string& path) {
  return landmark_clip_from_json(read_json_file(path));
}

/// One frame per frame_index, in index order. When two hands share a frame,
/// `selection` picks which one is encoded; a missing preferred hand falls back
/// to the first reported.
inline std::vector<HandLandmarkFrame> select_hand(const LandmarkClip& clip,
                                                  HandSelection selection = HandSelection::first) {
  std::map<std::uint32_t, HandLandmarkFrame> chosen;
  for (const auto& f : clip.frames) {
    auto [it, inserted] = chosen.emplace(f.frame_index, f);
    if (inserted) continue;
    const bool prefer =
        (selection == HandSelection::left && f.handedness == Handedness::left) ||
        (selection == HandSelection::right && f.handedness == Handedness::right);
    const bool current_matches =
        (selection == HandSelection::left && it->second.handedness == Handedness::left) ||
        (selection == HandSelection::right && it->second.handedness == Handedness::right);
    if (prefer && !current_matches) it->second = f;
  }
  std::vector<HandLandmarkFrame> out;
  out.reserve(chosen.size());
  for (auto& [_, f] : chosen) out.push_back(f);
  return out;
}

}  // namespace gestura
