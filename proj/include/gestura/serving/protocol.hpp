#pragma once

// Wire types for the edge-cloud inference protocol.
//
// POST /infer takes either
//   application/json:    {clip_id, view, intent_pool, frames: [8 strings], landmarks?: [8 x [1024]]}
//   multipart/form-data: part "request" = {clip_id, view, intent_pool, feature_shape: [8, 257|258, 1024]}
//                        part "features" = GSTR tensor frame
// and answers InferResponse JSON, or {error: {kind, field, message, latency?}}.

#include <algorithm>
#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gestura/clip.hpp"
#include "gestura/error.hpp"
#include "gestura/landmark.hpp"
#include "gestura/tensor_frame.hpp"
#include "json.hpp"

namespace gestura::serving {

struct LatencyBreakdown {
  double comm_ms = 0.0;
  double infer_ms = 0.0;
  double tts_ms = 0.0;
  double total_ms = 0.0;

  double phase_sum() const noexcept { return comm_ms + infer_ms + tts_ms; }
};

inline nlohmann::json to_json(const LatencyBreakdown& l) {
  return {{"comm_ms", l.comm_ms}, {"infer_ms", l.infer_ms}, {"tts_ms", l.tts_ms}, {"total_ms", l.total_ms}};
}

struct RankedIntent {
  std::string label;
  int score = 0;

  friend bool operator==(const RankedIntent&, const RankedIntent&) = default;
};

using LandmarkRow = std::array<double, kLandmarkFeatureDim>;

struct InferRequest {
  std::string clip_id;
  View view = View::exocentric;
  std::vector<std::string> intent_pool;
  std::vector<std::string> frames;               ///< JSON form: 8 opaque encoded images
  std::optional<std::vector<LandmarkRow>> landmarks;
  std::vector<float> features;                   ///< multipart form: [8][tokens][1024]
  std::size_t feature_tokens = 0;                ///< 257 or 258 when features are present

  bool has_features() const noexcept { return feature_tokens != 0; }

  /// Throws ProtocolError naming the offending field.
  void validate() const {
    if (clip_id.empty()) throw ProtocolError("clip_id", "must be a non-empty string");
    std::set<std::string> seen;
    for (const auto& label : intent_pool) {
      if (label.empty()) throw ProtocolError("intent_pool", "labels must be non-empty");
      if (!seen.insert(label).second) throw ProtocolError("intent_pool", "duplicate label '" + label + "'");
    }
    if (has_features()) {
      if (!frames.empty()) throw ProtocolError("frames", "send frames or features, not both");
      if (feature_tokens != kVisionTokens && feature_tokens != kTokensPerFrame)
        throw ProtocolError("feature_shape", "token count must be 257 or 258");
      if (features.size() != kFramesPerClip * feature_tokens * kTokenDim)
        throw ProtocolError("features", "tensor holds " + std::to_string(features.size()) + " values, shape needs " +
                                            std::to_string(kFramesPerClip * feature_tokens * kTokenDim));
    } else if (frames.size() != kFramesPerClip) {
      throw ProtocolError("frames", "expected exactly 8 frames, got " + std::to_string(frames.size()));
    }
    if (landmarks && landmarks->size() != kFramesPerClip)
      throw ProtocolError("landmarks", "expected exactly 8 landmark vectors");
  }
};

struct InferResponse {
  std::string clip_id;
  std::string description;
  std::string meaning;
  std::string intention;
  std::vector<RankedIntent> ranked_intents;
  LatencyBreakdown latency;
};

/// Everything except the request itself; used for both transport forms.
inline nlohmann::json request_header_json(const InferRequest& r) {
  nlohmann::json j{{"clip_id", r.clip_id}, {"view", std::string(to_string(r.view))}, {"intent_pool", r.intent_pool}};
  if (r.has_features()) j["feature_shape"] = {kFramesPerClip, r.feature_tokens, kTokenDim};
  return j;
}

inline nlohmann::json to_json(const InferRequest& r) {
  auto j = request_header_json(r);
  if (!r.has_features()) j["frames"] = r.frames;
  if (r.landmarks) {
    j["landmarks"] = nlohmann::json::array();
    for (const auto& row : *r.landmarks) j["landmarks"].push_back(row);
  }
  return j;
}

namespace detail {

inline void read_header(const nlohmann::json& j, InferRequest& r) {
  if (!j.is_object()) throw ProtocolError("", "request must be a JSON object");
  if (!j.contains("clip_id") || !j["clip_id"].is_string()) throw ProtocolError("clip_id", "missing or not a string");
  r.clip_id = j["clip_id"].get<std::string>();
  if (!j.contains("view") || !j["view"].is_string() || !parse_view(j["view"].get<std::string>()))
    throw ProtocolError("view", "must be egocentric or exocentric");
  r.view = *parse_view(j["view"].get<std::string>());
  if (!j.contains("intent_pool") || !j["intent_pool"].is_array())
    throw ProtocolError("intent_pool", "missing or not an array");
  for (const auto& l : j["intent_pool"]) {
    if (!l.is_string()) throw ProtocolError("intent_pool", "labels must be strings");
    r.intent_pool.push_back(l.get<std::string>());
  }
  if (j.contains("landmarks") && !j["landmarks"].is_null()) {
    const auto& lm = j["landmarks"];
    if (!lm.is_array()) throw ProtocolError("landmarks", "not an array");
    std::vector<LandmarkRow> rows;
    for (const auto& row : lm) {
      if (!row.is_array() || row.size() != kLandmarkFeatureDim)
        throw ProtocolError("landmarks", "each landmark vector needs 1024 numbers");
      LandmarkRow out{};
      for (std::size_t i = 0; i < kLandmarkFeatureDim; ++i) {
        if (!row[i].is_number()) throw ProtocolError("landmarks", "non-numeric value");
        out[i] = row[i].get<double>();
      }
      rows.push_back(out);
    }
    r.landmarks = std::move(rows);
  }
}

}  // namespace detail

inline nlohmann::json parse_json_body(std::string_view body, const char* field = "") {
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProtocolError(field, std::string("body is not valid JSON: ") + e.what());
  }
}

inline InferRequest infer_request_from_json(const nlohmann::json& j) {
  InferRequest r;
  detail::read_header(j, r);
  if (j.contains("feature_shape"))
    throw ProtocolError("feature_shape", "feature tensors must be sent as multipart with a features part");
  if (!j.contains("frames") || !j["frames"].is_array()) throw ProtocolError("frames", "missing or not an array");
  for (const auto& f : j["frames"]) {
    if (!f.is_string()) throw ProtocolError("frames", "frames must be encoded strings");
    r.frames.push_back(f.get<std::string>());
  }
  r.validate();
  return r;
}

inline InferRequest infer_request_from_multipart(const nlohmann::json& header, std::string_view feature_bytes) {
  InferRequest r;
  detail::read_header(header, r);
  if (!header.contains("feature_shape") || !header["feature_shape"].is_array() || header["feature_shape"].size() != 3)
    throw ProtocolError("feature_shape", "expected [8, 257|258, 1024]");
  const auto& s = header["feature_shape"];
  for (const auto& d : s)
    if (!d.is_number_unsigned()) throw ProtocolError("feature_shape", "dimensions must be positive integers");
  if (s[0].get<std::size_t>() != kFramesPerClip || s[2].get<std::size_t>() != kTokenDim)
    throw ProtocolError("feature_shape", "expected [8, 257|258, 1024]");
  r.feature_tokens = s[1].get<std::size_t>();
  if (r.feature_tokens == 0) throw ProtocolError("feature_shape", "expected [8, 257|258, 1024]");
  r.features = decode_tensor_frame(feature_bytes);
  r.validate();
  return r;
}

inline nlohmann::json to_json(const InferResponse& r) {
  nlohmann::json ranked = nlohmann::json::array();
  for (const auto& ri : r.ranked_intents) ranked.push_back({{"label", ri.label}, {"score", ri.score}});
  return {{"clip_id", r.clip_id},   {"description", r.description}, {"meaning", r.meaning},
          {"intention", r.intention}, {"ranked_intents", ranked},     {"latency", to_json(r.latency)}};
}

inline InferResponse infer_response_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ProtocolError("", "response must be an object");
  InferResponse r;
  for (const char* f : {"clip_id", "description", "meaning", "intention"})
    if (!j.contains(f) || !j[f].is_string()) throw ProtocolError(f, "missing or not a string");
  r.clip_id = j["clip_id"].get<std::string>();
  r.description = j["description"].get<std::string>();
  r.meaning = j["meaning"].get<std::string>();
  r.intention = j["intention"].get<std::string>();
  if (!j.contains("ranked_intents") || !j["ranked_intents"].is_array())
    throw ProtocolError("ranked_intents", "missing or not an array");
  for (const auto& ri : j["ranked_intents"]) {
    if (!ri.contains("label") || !ri["label"].is_string() || !ri.contains("score") || !ri["score"].is_number_integer())
      throw ProtocolError("ranked_intents", "entries need label and integer score");
    r.ranked_intents.push_back({ri["label"].get<std::string>(), ri["score"].get<int>()});
  }
  if (!j.contains("latency") || !j["latency"].is_object()) throw ProtocolError("latency", "missing");
  const auto& l = j["latency"];
  for (const char* f : {"comm_ms", "infer_ms", "tts_ms", "total_ms"})
    if (!l.contains(f) || !l[f].is_number()) throw ProtocolError(std::string("latency.") + f, "missing");
  r.latency = {l["comm_ms"].get<double>(), l["infer_ms"].get<double>(), l["tts_ms"].get<double>(),
               l["total_ms"].get<double>()};
  return r;
}

/// {error: {kind, field, message, latency?}}
inline nlohmann::json error_body(ErrorKind kind, const std::string& field, const std::string& message,
                                 const std::optional<LatencyBreakdown>& latency = std::nullopt) {
  nlohmann::json e{{"kind", std::string(to_string(kind))}, {"field", field}, {"message", message}};
  if (latency) e["latency"] = to_json(*latency);
  return {{"error", e}};
}

inline int http_status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::protocol:
    case ErrorKind::invalid_input:
    case ErrorKind::parse:
    case ErrorKind::format: return 400;
    case ErrorKind::timeout: return 504;
    case ErrorKind::backend_unavailable: return 503;
    default: return 500;
  }
}

}  // namespace gestura::serving
