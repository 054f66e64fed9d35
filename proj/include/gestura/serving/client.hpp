#pragma once

// Glasses-side client: builds requests from local files and talks to the
// inference server.

#include <chrono>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "gestura/clip.hpp"
#include "gestura/error.hpp"
#include "gestura/judge.hpp"
#include "gestura/landmark.hpp"
#include "gestura/landmark_io.hpp"
#include "gestura/serving/protocol.hpp"
#include "gestura/tensor_frame.hpp"
#include "gestura/detail/http.hpp"
#include "json.hpp"

namespace gestura::serving {

/// Typed error reported by the server.
class ServerError : public Error {
 public:
  ServerError(ErrorKind kind, int status, std::string field, const std::string& message,
              std::optional<LatencyBreakdown> latency)
      : Error(kind, message), status_(status), field_(std::move(field)), latency_(latency) {}

  int status() const noexcept { return status_; }
  const std::string& field() const noexcept { return field_; }
  const std::optional<LatencyBreakdown>& latency() const noexcept { return latency_; }

 private:
  int status_;
  std::string field_;
  std::optional<LatencyBreakdown> latency_;
};

inline ErrorKind parse_error_kind(std::string_view s) {
  for (auto k : {ErrorKind::invalid_input, ErrorKind::format, ErrorKind::parse, ErrorKind::freeze_violation,
                 ErrorKind::protocol, ErrorKind::timeout, ErrorKind::backend_unavailable, ErrorKind::transport,
                 ErrorKind::port_unavailable})
    if (to_string(k) == s) return k;
  return ErrorKind::protocol;
}

struct ClientConfig {
  Endpoint endpoint;
  std::chrono::milliseconds timeout{35000};
};

namespace detail {

inline httplib::Client make_client(const ClientConfig& cfg) {
  httplib::Client cli(cfg.endpoint.host, cfg.endpoint.port);
  const auto s = std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout);
  const auto us = std::chrono::duration_cast<std::chrono::microseconds>(cfg.timeout - s);
  cli.set_connection_timeout(s.count(), us.count());
  cli.set_read_timeout(s.count(), us.count());
  cli.set_write_timeout(s.count(), us.count());
  return cli;
}

[[noreturn]] inline void throw_server_error(const httplib::Response& res) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(res.body);
  } catch (const nlohmann::json::parse_error&) {
    throw ServerError(ErrorKind::protocol, res.status, "", "HTTP " + std::to_string(res.status) + " without a framed error",
                      std::nullopt);
  }
  if (!j.is_object() || !j.contains("error") || !j["error"].is_object())
    throw ServerError(ErrorKind::protocol, res.status, "", "HTTP " + std::to_string(res.status) + " without a framed error",
                      std::nullopt);
  const auto& e = j["error"];
  std::optional<LatencyBreakdown> lat;
  if (e.contains("latency") && e["latency"].is_object()) {
    const auto& l = e["latency"];
    lat = LatencyBreakdown{l.value("comm_ms", 0.0), l.value("infer_ms", 0.0), l.value("tts_ms", 0.0),
                           l.value("total_ms", 0.0)};
  }
  throw ServerError(parse_error_kind(e.value("kind", std::string("protocol"))), res.status,
                    e.value("field", std::string()), e.value("message", std::string("server error")), lat);
}

}  // namespace detail

inline nlohmann::json get_health(const ClientConfig& cfg) {
  auto cli = detail::make_client(cfg);
  auto res = cli.Get("/health");
  if (!res) throw Error(ErrorKind::transport, "health check failed: " + httplib::to_string(res.error()));
  if (res->status != 200) detail::throw_server_error(*res);
  return parse_json_body(res->body);
}

/// Sends one request. Client-side latency replaces the server's: total is the
/// measured round trip and comm is what remains after infer and tts.
inline InferResponse send_infer(const ClientConfig& cfg, const InferRequest& req) {
  req.validate();
  auto cli = detail::make_client(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  httplib::Result res;
  if (req.has_features()) {
    httplib::MultipartFormDataItems items = {
        {"request", request_header_json(req).dump(), "", "application/json"},
        {"features", encode_tensor_frame(req.features), "features.gstr", "application/octet-stream"},
    };
    res = cli.Post("/infer", items);
  } else {
    res = cli.Post("/infer", to_json(req).dump(), "application/json");
  }
  const auto t1 = std::chrono::steady_clock::now();
  if (!res) throw Error(ErrorKind::transport, "infer request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) detail::throw_server_error(*res);
  auto resp = infer_response_from_json(parse_json_body(res->body));
  if (resp.clip_id != req.clip_id) throw ProtocolError("clip_id", "response is for a different clip");
  resp.latency.total_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  resp.latency.comm_ms = resp.latency.total_ms - resp.latency.infer_ms - resp.latency.tts_ms;
  return resp;
}

/// Frame references carry no pixels; a real deployment swaps in encoded images.
inline std::string frame_reference(const std::string& clip_id, std::uint32_t index) {
  return clip_id + "#" + std::to_string(index);
}

/// Landmark vectors for the sampled frames; a sampled frame with no tracked
/// hand gets an invalid (all-zero) vector.
inline std::vector<LandmarkRow> sampled_landmarks(const LandmarkClip& clip, std::span<const std::uint32_t> indices,
                                                  HandSelection hand = HandSelection::first) {
  const auto frames = select_hand(clip, hand);
  std::vector<LandmarkRow> out;
  for (auto idx : indices) {
    HandLandmarkFrame f;
    f.valid = false;
    f.frame_index = idx;
    for (const auto& c : frames)
      if (c.frame_index == idx) f = c;
    out.push_back(encode_landmarks(f).values);
  }
  return out;
}

struct ClientSendInputs {
  ClipMeta clip;
  std::optional<LandmarkClip> landmarks;
  std::optional<std::vector<float>> vision_features;  ///< 8 x 257 x 1024
  std::vector<std::string> intent_pool;
  HandSelection hand = HandSelection::first;
};

/// Samples 8 frames, encodes landmarks locally, and frames the request. With
/// vision features the landmark row is appended to each frame (258 tokens).
inline InferRequest build_infer_request(const ClientSendInputs& in) {
  InferRequest r;
  r.clip_id = in.clip.clip_id;
  r.view = in.clip.view;
  r.intent_pool = in.intent_pool;
  const auto idx = sample_frame_indices(in.clip.n_frames);
  std::optional<std::vector<LandmarkRow>> rows;
  if (in.landmarks) rows = sampled_landmarks(*in.landmarks, idx, in.hand);

  if (in.vision_features) {
    const auto& v = *in.vision_features;
    if (v.size() != kFramesPerClip * kVisionTokens * kTokenDim)
      throw InvalidInput("vision features must hold 8 x 257 x 1024 values, got " + std::to_string(v.size()));
    if (!rows) {
      r.features = v;
      r.feature_tokens = kVisionTokens;
    } else {
      std::vector<Matrix<float>> vision;
      std::vector<LandmarkFeatureVector> lms;
      for (std::size_t f = 0; f < kFramesPerClip; ++f) {
        Matrix<float> m(kVisionTokens, kTokenDim);
        std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(f * kVisionTokens * kTokenDim),
                    kVisionTokens * kTokenDim, m.flat().begin());
        vision.push_back(std::move(m));
        LandmarkFeatureVector lv;
        lv.values = (*rows)[f];
        lms.push_back(lv);
      }
      auto block = assemble_clip_tokens<float>(vision, lms);
      r.features = std::move(block.data);
      r.feature_tokens = kTokensPerFrame;
    }
  } else {
    for (auto i : idx) r.frames.push_back(frame_reference(r.clip_id, i));
    r.landmarks = rows;
  }
  r.validate();
  return r;
}

inline std::vector<float> read_tensor_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path, "cannot open file");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_tensor_frame(bytes);
  } catch (const ProtocolError& e) {
    throw FormatError(path, e.what());
  }
}

}  // namespace gestura::serving
