#pragma once

// Model backends behind the inference server.

#include <chrono>
#include <memory>
#include <string>
#include <thread>

#include "gestura/detail/hash.hpp"
#include "gestura/error.hpp"
#include "gestura/serving/protocol.hpp"

namespace gestura::serving {

struct BackendOutput {
  std::string description;
  std::string meaning;
  std::string intention;
};

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  virtual std::string kind() const = 0;
  virtual bool ready() const { return true; }
  /// Concurrent infer() calls the backend accepts.
  virtual std::size_t max_in_flight() const { return 64; }
  /// Simulated transfer time spent on the server side of the link.
  virtual std::chrono::milliseconds comm_delay() const { return std::chrono::milliseconds{0}; }
  virtual BackendOutput infer(const InferRequest& request) = 0;
  /// Speech synthesis of the intention text; only the time it takes matters.
  virtual void speak(const std::string& /*text*/) {}
};

struct MockBackendConfig {
  std::chrono::milliseconds comm{0};
  std::chrono::milliseconds infer{0};
  std::chrono::milliseconds tts{0};
  std::size_t max_in_flight = 64;

  /// 1.6 s inference with the rest of a 7.83 s round trip split between
  /// transfer and speech. The split itself is configuration.
  static MockBackendConfig field_trial() {
    return {std::chrono::milliseconds{5230}, std::chrono::milliseconds{1600}, std::chrono::milliseconds{1000}, 64};
  }
};

/// Sleeps for the configured delays and answers with text derived only from
/// the request, so responses are reproducible.
class MockBackend : public ModelBackend {
 public:
  explicit MockBackend(MockBackendConfig cfg = {}) : cfg_(cfg) {}

  std::string kind() const override { return "mock"; }
  std::size_t max_in_flight() const override { return cfg_.max_in_flight; }
  std::chrono::milliseconds comm_delay() const override { return cfg_.comm; }

  BackendOutput infer(const InferRequest& r) override {
    if (cfg_.infer.count() > 0) std::this_thread::sleep_for(cfg_.infer);
    BackendOutput out;
    out.intention = r.intent_pool.empty()
                        ? "unrecognized gesture"
                        : r.intent_pool[gestura::detail::Fnv1a{}.update(r.clip_id).value() % r.intent_pool.size()];
    out.description = "The hand performs a gesture over " + std::to_string(kFramesPerClip) + " sampled " +
                      std::string(to_string(r.view)) + " frames" +
                      (r.landmarks ? " with landmark guidance." : ".");
    out.meaning = "The gesture most likely means: " + out.intention + ".";
    return out;
  }

  void speak(const std::string&) override {
    if (cfg_.tts.count() > 0) std::this_thread::sleep_for(cfg_.tts);
  }

 private:
  MockBackendConfig cfg_;
};

}  // namespace gestura::serving
