#pragma once

// Latency benchmark over repeated infer requests.

#include <algorithm>
#include <atomic>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "gestura/metrics/stats.hpp"
#include "gestura/serving/client.hpp"
#include "json.hpp"

namespace gestura::serving {

struct PhaseStats {
  double mean = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
};

struct BenchReport {
  std::size_t n_requests = 0;
  std::size_t n_ok = 0;
  std::size_t n_errors = 0;
  std::vector<std::string> errors;
  std::vector<LatencyBreakdown> samples;
  PhaseStats comm, infer, tts, total;
  double wall_ms = 0.0;
};

inline PhaseStats phase_stats(std::vector<double> v) {
  if (v.empty()) return {};
  std::sort(v.begin(), v.end());
  return {metrics::mean(v), metrics::quantile_sorted(v, 0.5), metrics::quantile_sorted(v, 0.95)};
}

/// Sends `n_requests` copies of `request` with up to `concurrency` in flight.
/// Transport and server errors are counted, not thrown.
inline BenchReport bench_latency(const ClientConfig& cfg, const InferRequest& request, std::size_t n_requests,
                                 std::size_t concurrency = 1) {
  if (n_requests == 0) throw InvalidInput("bench_latency: need at least one request");
  if (concurrency == 0) throw InvalidInput("bench_latency: concurrency must be >= 1");
  BenchReport rep;
  rep.n_requests = n_requests;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  const auto t0 = std::chrono::steady_clock::now();
  auto worker = [&] {
    while (next++ < n_requests) {
      try {
        const auto resp = send_infer(cfg, request);
        std::lock_guard lock(mu);
        rep.samples.push_back(resp.latency);
      } catch (const Error& e) {
        std::lock_guard lock(mu);
        rep.errors.push_back(std::string(to_string(e.kind())) + ": " + e.what());
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < std::min(concurrency, n_requests); ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  rep.n_ok = rep.samples.size();
  rep.n_errors = rep.errors.size();
  std::vector<double> c, i, t, tot;
  for (const auto& s : rep.samples) {
    c.push_back(s.comm_ms);
    i.push_back(s.infer_ms);
    t.push_back(s.tts_ms);
    tot.push_back(s.total_ms);
  }
  rep.comm = phase_stats(c);
  rep.infer = phase_stats(i);
  rep.tts = phase_stats(t);
  rep.total = phase_stats(tot);
  return rep;
}

inline nlohmann::json to_json(const PhaseStats& s) { return {{"mean", s.mean}, {"p50", s.p50}, {"p95", s.p95}}; }

inline nlohmann::json to_json(const BenchReport& r) {
  return {{"n_requests", r.n_requests}, {"n_ok", r.n_ok},          {"n_errors", r.n_errors},
          {"errors", r.errors},         {"comm_ms", to_json(r.comm)}, {"infer_ms", to_json(r.infer)},
          {"tts_ms", to_json(r.tts)},   {"total_ms", to_json(r.total)}, {"wall_ms", r.wall_ms}};
}

}  // namespace gestura::serving
