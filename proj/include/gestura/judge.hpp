#pragma once

// 0-5 semantic judge: a deterministic token-F1 judge, an HTTP client for a
// remote judge, a caching decorator and the paraphrase-stability probe.

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "gestura/detail/hash.hpp"
#include "gestura/error.hpp"
#include "gestura/metrics/accuracy.hpp"
#include "gestura/metrics/bleu.hpp"
#include "gestura/detail/http.hpp"
#include "json.hpp"

namespace gestura {

using metrics::JudgeScore;

struct JudgeRequest {
  std::string prediction;
  std::string gold;
  int variant = 0;

  void validate() const {
    if (prediction.empty()) throw InvalidInput("judge request: empty prediction");
    if (gold.empty()) throw InvalidInput("judge request: empty gold");
    if (variant < 0) throw InvalidInput("judge request: variant must be >= 0");
  }
};

inline nlohmann::json to_json(const JudgeRequest& r) {
  return {{"prediction", r.prediction}, {"gold", r.gold}, {"variant", r.variant}};
}

inline JudgeRequest judge_request_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ProtocolError("", "judge request must be an object");
  for (const char* f : {"prediction", "gold"})
    if (!j.contains(f) || !j[f].is_string()) throw ProtocolError(f, "missing or not a string");
  JudgeRequest r{j["prediction"].get<std::string>(), j["gold"].get<std::string>(), 0};
  if (j.contains("variant")) {
    if (!j["variant"].is_number_integer()) throw ProtocolError("variant", "not an integer");
    r.variant = j["variant"].get<int>();
  }
  try {
    r.validate();
  } catch (const InvalidInput& e) {
    throw ProtocolError(r.prediction.empty() ? "prediction" : r.gold.empty() ? "gold" : "variant", e.what());
  }
  return r;
}

class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  virtual std::string kind() const = 0;
  virtual JudgeScore score(const JudgeRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// Deterministic judge

/// Word tokens only; punctuation is dropped.
inline std::vector<std::string> judge_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : metrics::tokenize(text))
    if (!(t.size() == 1 && std::ispunct(static_cast<unsigned char>(t[0])))) out.push_back(std::move(t));
  return out;
}

/// Multiset token-overlap F1.
inline double token_f1(std::string_view prediction, std::string_view gold) {
  const auto p = judge_tokens(prediction), g = judge_tokens(gold);
  if (p.empty() || g.empty()) return 0.0;
  std::map<std::string, std::size_t> gc;
  for (const auto& t : g) ++gc[t];
  std::size_t common = 0;
  for (const auto& t : p)
    if (auto it = gc.find(t); it != gc.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(p.size());
  const double recall = static_cast<double>(common) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

inline int f1_band(double f1) {
  if (f1 < 0.1) return 0;
  if (f1 < 0.35) return 1;
  if (f1 < 0.55) return 2;
  if (f1 < 0.7) return 3;
  if (f1 < 0.85) return 4;
  return 5;
}

class DeterministicJudge : public JudgeBackend {
 public:
  std::string kind() const override { return "deterministic"; }
  JudgeScore score(const JudgeRequest& r) override {
    r.validate();
    const double f1 = token_f1(r.prediction, r.gold);
    return {f1_band(f1), "token_f1=" + std::to_string(f1)};
  }
};

// ---------------------------------------------------------------------------
// Remote judge

/// Judge prompt for a paraphrase variant; all variants carry the same scale.
inline std::string render_judge_prompt(const JudgeRequest& r) {
  static const char* const kIntro[] = {
      "Compare the model output with the ground truth label and score their semantic similarity on a 0–5 scale:",
      "Rate how closely the model output matches the meaning of the ground truth label, using a 0–5 scale:",
      "Judge the semantic agreement between the model output and the reference label on a 0–5 scale:",
  };
  std::string out = kIntro[static_cast<std::size_t>(r.variant) % 3];
  out += "\n- 0: completely unrelated\n- 1-3: weak or partial match\n- 4–5: semantically accurate\n";
  out += "Model output: " + r.prediction + "\nGround truth: " + r.gold + "\n";
  out += "Reply with a single integer from 0 to 5.";
  return out;
}

/// Reply is {"score": int} or {"text": "..."} containing exactly one integer 0-5.
inline JudgeScore parse_judge_reply(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProtocolError("", std::string("judge reply is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("", "judge reply must be an object");
  if (j.contains("score")) {
    if (!j["score"].is_number_integer()) throw ProtocolError("score", "not an integer");
    const int s = j["score"].get<int>();
    if (s < 0 || s > 5) throw ProtocolError("score", "outside 0..5");
    return {s, std::nullopt};
  }
  if (j.contains("text") && j["text"].is_string()) {
    const auto text = j["text"].get<std::string>();
    static const std::regex number(R"(-?\d+(\.\d+)?)");
    std::vector<std::string> found;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), number); it != std::sregex_iterator(); ++it)
      found.push_back(it->str());
    if (found.size() != 1) throw ProtocolError("text", "expected exactly one integer, found " + std::to_string(found.size()));
    if (found[0].find('.') != std::string::npos || found[0].size() != 1 || found[0][0] < '0' || found[0][0] > '5')
      throw ProtocolError("text", "'" + found[0] + "' is not an integer in 0..5");
    return {found[0][0] - '0', text};
  }
  throw ProtocolError("score", "reply has neither score nor text");
}

struct Endpoint {
  std::string host = "127.0.0.1";
  int port = 0;
};

/// "http://host:port" or "host:port".
inline Endpoint parse_endpoint(std::string_view s) {
  std::string t(s);
  if (t.rfind("http://", 0) == 0) t = t.substr(7);
  while (!t.empty() && t.back() == '/') t.pop_back();
  const auto colon = t.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == t.size())
    throw InvalidInput("endpoint '" + std::string(s) + "' must look like host:port");
  Endpoint e;
  e.host = t.substr(0, colon);
  try {
    std::size_t used = 0;
    e.port = std::stoi(t.substr(colon + 1), &used);
    if (used != t.size() - colon - 1 || e.port <= 0 || e.port > 65535) throw std::out_of_range("port");
  } catch (const std::exception&) {
    throw InvalidInput("endpoint '" + std::string(s) + "' has an invalid port");
  }
  return e;
}

struct RemoteJudgeConfig {
  Endpoint endpoint;
  int retries = 2;  ///< extra attempts after the first
  std::chrono::milliseconds timeout{30000};
  std::chrono::milliseconds backoff{50};
};

class RemoteJudge : public JudgeBackend {
 public:
  explicit RemoteJudge(RemoteJudgeConfig cfg) : cfg_(std::move(cfg)) {}

  std::string kind() const override { return "remote"; }

  JudgeScore score(const JudgeRequest& r) override {
    r.validate();
    auto body = to_json(r);
    body["prompt"] = render_judge_prompt(r);
    const auto payload = body.dump();
    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(cfg_.backoff * attempt);
      httplib::Client cli(cfg_.endpoint.host, cfg_.endpoint.port);
      const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
      const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
      cli.set_connection_timeout(secs.count(), usecs.count());
      cli.set_read_timeout(secs.count(), usecs.count());
      cli.set_write_timeout(secs.count(), usecs.count());
      auto res = cli.Post("/judge", payload, "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status == 503 || res->status == 502 || res->status == 504) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) throw ProtocolError("", "judge replied HTTP " + std::to_string(res->status));
      return parse_judge_reply(res->body);
    }
    throw Error(ErrorKind::backend_unavailable, "remote judge unavailable after " +
                                                    std::to_string(cfg_.retries + 1) + " attempts: " + last_error);
  }

 private:
  RemoteJudgeConfig cfg_;
};

/// Remote judge when GESTURA_JUDGE_ENDPOINT is set, deterministic otherwise.
inline std::shared_ptr<JudgeBackend> judge_from_environment() {
  if (const char* ep = std::getenv("GESTURA_JUDGE_ENDPOINT"); ep && *ep)
    return std::make_shared<RemoteJudge>(RemoteJudgeConfig{parse_endpoint(ep)});
  return std::make_shared<DeterministicJudge>();
}

// ---------------------------------------------------------------------------
// Cache

inline std::string judge_cache_key(const JudgeRequest& r) {
  return gestura::detail::Fnv1a{}
      .update(r.prediction)
      .update(std::string_view("\0", 1))
      .update(r.gold)
      .update(std::string_view("\0", 1))
      .update(static_cast<std::uint64_t>(r.variant))
      .hex();
}

/// Memoizes another backend. Concurrent requests for the same key share one
/// backend call. With a path, hits persist as JSONL {key, score}.
class CachingJudge : public JudgeBackend {
 public:
  explicit CachingJudge(std::shared_ptr<JudgeBackend> inner, std::optional<std::string> path = std::nullopt)
      : inner_(std::move(inner)), path_(std::move(path)) {
    if (!path_) return;
    std::ifstream in(*path_);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        const int s = j.at("score").get<int>();
        if (s < 0 || s > 5) throw std::out_of_range("score");
        done_[j.at("key").get<std::string>()] = s;
      } catch (const std::exception& e) {
        throw FormatError(*path_ + ":" + std::to_string(n), std::string("bad cache record: ") + e.what());
      }
    }
  }

  std::string kind() const override { return inner_->kind(); }

  JudgeScore score(const JudgeRequest& r) override {
    r.validate();
    const auto key = judge_cache_key(r);
    std::unique_lock lock(mu_);
    if (auto it = done_.find(key); it != done_.end()) return {it->second, std::nullopt};
    if (auto it = pending_.find(key); it != pending_.end()) {
      auto fut = it->second;
      lock.unlock();
      return {fut.get(), std::nullopt};
    }
    std::promise<int> promise;
    pending_[key] = promise.get_future().share();
    ++backend_calls_;
    lock.unlock();

    JudgeScore s;
    try {
      s = inner_->score(r);
    } catch (...) {
      lock.lock();
      pending_.erase(key);
      promise.set_exception(std::current_exception());
      throw;
    }
    lock.lock();
    done_[key] = s.score;
    pending_.erase(key);
    if (path_) {
      std::ofstream out(*path_, std::ios::app);
      out << nlohmann::json{{"key", key}, {"score", s.score}}.dump() << '\n';
    }
    lock.unlock();
    promise.set_value(s.score);
    return s;
  }

  std::size_t backend_calls() const {
    std::lock_guard lock(mu_);
    return backend_calls_;
  }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return done_.size();
  }

 private:
  std::shared_ptr<JudgeBackend> inner_;
  std::optional<std::string> path_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, int> done_;
  std::unordered_map<std::string, std::shared_future<int>> pending_;
  std::size_t backend_calls_ = 0;
};

/// Scores `requests` with at most `max_in_flight` concurrent backend calls.
/// Results keep the input order.
inline std::vector<JudgeScore> score_all(std::span<const JudgeRequest> requests, JudgeBackend& backend,
                                         std::size_t max_in_flight = 1) {
  if (max_in_flight == 0) throw InvalidInput("score_all: max_in_flight must be >= 1");
  std::vector<JudgeScore> out(requests.size());
  std::vector<std::exception_ptr> errors(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < requests.size();) {
      try {
        out[i] = backend.score(requests[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(max_in_flight, requests.size()); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---------------------------------------------------------------------------
// Stability probe

struct StabilityReport {
  std::vector<std::vector<bool>> verdicts;  ///< [item][variant]
  std::vector<double> acceptance_rates;     ///< per variant
  double std_of_rates = 0.0;                ///< population standard deviation
};

/// Scores every item under `n_variants` prompt variants.
inline StabilityReport stability_probe(std::span<const JudgeRequest> items, JudgeBackend& backend,
                                       int n_variants = 3) {
  if (n_variants < 2) throw InvalidInput("stability_probe: need at least two variants");
  if (items.empty()) throw InvalidInput("stability_probe: no items");
  StabilityReport rep;
  rep.verdicts.assign(items.size(), std::vector<bool>(static_cast<std::size_t>(n_variants)));
  rep.acceptance_rates.assign(static_cast<std::size_t>(n_variants), 0.0);
  for (std::size_t i = 0; i < items.size(); ++i)
    for (int v = 0; v < n_variants; ++v) {
      JudgeRequest r = items[i];
      r.variant = v;
      const bool ok = metrics::accept(backend.score(r));
      rep.verdicts[i][static_cast<std::size_t>(v)] = ok;
      rep.acceptance_rates[static_cast<std::size_t>(v)] += ok ? 1.0 : 0.0;
    }
  double m = 0.0;
  for (auto& r : rep.acceptance_rates) {
    r /= static_cast<double>(items.size());
    m += r / n_variants;
  }
  double ss = 0.0;
  for (double r : rep.acceptance_rates) ss += (r - m) * (r - m);
  rep.std_of_rates = std::sqrt(ss / n_variants);
  return rep;
}

}  // namespace gestura
