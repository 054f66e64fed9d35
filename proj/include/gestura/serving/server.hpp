#pragma once

// HTTP inference server: /infer, /health, /judge.

#include <algorithm>
#include <chrono>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>

#include <sys/socket.h>

#include "gestura/error.hpp"
#include "gestura/judge.hpp"
#include "gestura/serving/backend.hpp"
#include "gestura/serving/protocol.hpp"
#include "gestura/detail/http.hpp"
#include "json.hpp"

namespace gestura::serving {

/// A request ran past its deadline; `partial` holds the phases measured so far.
class RequestTimeout : public Error {
 public:
  RequestTimeout(const std::string& message, LatencyBreakdown partial)
      : Error(ErrorKind::timeout, message), partial_(partial) {}
  const LatencyBreakdown& partial() const noexcept { return partial_; }

 private:
  LatencyBreakdown partial_;
};

using Clock = std::chrono::steady_clock;

inline double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

/// Judge every pool label against `intention`; score descending, then label.
inline std::vector<RankedIntent> rank_intents(const std::vector<std::string>& pool, const std::string& intention,
                                              JudgeBackend& judge) {
  std::vector<RankedIntent> out;
  for (const auto& label : pool) out.push_back({label, judge.score({intention, label, 0}).score});
  std::sort(out.begin(), out.end(), [](const RankedIntent& a, const RankedIntent& b) {
    return a.score != b.score ? a.score > b.score : a.label < b.label;
  });
  return out;
}

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 0;  ///< 0 picks a free port
  std::shared_ptr<ModelBackend> backend = std::make_shared<MockBackend>();
  std::shared_ptr<JudgeBackend> judge = std::make_shared<DeterministicJudge>();
  std::chrono::milliseconds timeout{30000};
  std::size_t threads = 32;
};

class InferenceServer {
 public:
  explicit InferenceServer(ServerConfig cfg)
      : cfg_(std::move(cfg)) {
    if (!cfg_.backend) throw InvalidInput("server: no backend configured");
    if (!cfg_.judge) throw InvalidInput("server: no judge configured");
    slots_ = std::make_shared<std::counting_semaphore<1 << 20>>(
        static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, cfg_.backend->max_in_flight())));
  }

  InferenceServer(const InferenceServer&) = delete;
  InferenceServer& operator=(const InferenceServer&) = delete;
  ~InferenceServer() { stop(); }

  /// Binds and starts serving on a background thread. Throws
  /// Error(port_unavailable) if the address is taken.
  void start() {
    std::lock_guard lock(mu_);
    if (thread_.joinable()) throw InvalidInput("server already running");
    http_ = std::make_unique<httplib::Server>();
    configure(*http_);
    if (cfg_.port == 0) {
      port_ = http_->bind_to_any_port(cfg_.host);
    } else {
      port_ = http_->bind_to_port(cfg_.host, cfg_.port) ? cfg_.port : -1;
    }
    if (port_ <= 0) {
      http_.reset();
      throw Error(ErrorKind::port_unavailable,
                  "cannot listen on " + cfg_.host + ":" + std::to_string(cfg_.port));
    }
    thread_ = std::thread([srv = http_.get()] { srv->listen_after_bind(); });
    http_->wait_until_ready();
  }

  void stop() {
    std::lock_guard lock(mu_);
    if (http_) http_->stop();
    if (thread_.joinable()) thread_.join();
    http_.reset();
  }

  int port() const noexcept { return port_; }
  const ServerConfig& config() const noexcept { return cfg_; }

  nlohmann::json health() const {
    const bool ready = cfg_.backend->ready();
    return {{"status", ready ? "ok" : "degraded"}, {"backend", cfg_.backend->kind()}, {"ready", ready}};
  }

  /// Runs one request through comm, infer and tts. `t0` is when the request
  /// arrived; comm is whatever time is not infer or tts.
  InferResponse process(const InferRequest& req, Clock::time_point t0) {
    if (const auto d = cfg_.backend->comm_delay(); d.count() > 0) std::this_thread::sleep_for(d);
    const auto deadline = t0 + cfg_.timeout;

    const auto t_infer = Clock::now();
    auto partial = [&](Clock::time_point now) {
      LatencyBreakdown l;
      l.infer_ms = ms_between(t_infer, now);
      l.total_ms = ms_between(t0, now);
      l.comm_ms = l.total_ms - l.infer_ms;
      return l;
    };
    if (!slots_->try_acquire_until(deadline))
      throw RequestTimeout("backend busy past the request deadline", partial(Clock::now()));

    // The backend runs detached so a stuck call cannot hold the handler past
    // its deadline; it releases its slot whenever it finishes.
    auto task = std::make_shared<std::packaged_task<BackendOutput()>>(
        [backend = cfg_.backend, req, slots = slots_] {
          struct Release {
            decltype(slots)& s;
            ~Release() { s->release(); }
          } release{slots};
          return backend->infer(req);
        });
    auto fut = task->get_future();
    std::thread([task] { (*task)(); }).detach();
    if (fut.wait_until(deadline) != std::future_status::ready)
      throw RequestTimeout("backend did not answer within " + std::to_string(cfg_.timeout.count()) + " ms",
                           partial(Clock::now()));
    const BackendOutput out = fut.get();
    const auto t_infer_end = Clock::now();

    InferResponse resp;
    resp.clip_id = req.clip_id;
    resp.description = out.description;
    resp.meaning = out.meaning;
    resp.intention = out.intention;
    resp.ranked_intents = rank_intents(req.intent_pool, out.intention, *cfg_.judge);

    const auto t_tts = Clock::now();
    cfg_.backend->speak(out.intention);
    const auto t_end = Clock::now();

    resp.latency.infer_ms = ms_between(t_infer, t_infer_end);
    resp.latency.tts_ms = ms_between(t_tts, t_end);
    resp.latency.total_ms = ms_between(t0, t_end);
    resp.latency.comm_ms = resp.latency.total_ms - resp.latency.infer_ms - resp.latency.tts_ms;
    return resp;
  }

 private:
  static void send_error(httplib::Response& res, ErrorKind kind, const std::string& field, const std::string& msg,
                         const std::optional<LatencyBreakdown>& latency = std::nullopt) {
    res.status = http_status_for(kind);
    res.set_content(error_body(kind, field, msg, latency).dump(), "application/json");
  }

  template <typename Fn>
  static void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const RequestTimeout& e) {
      send_error(res, e.kind(), "", e.what(), e.partial());
    } catch (const ProtocolError& e) {
      send_error(res, e.kind(), e.field(), e.what());
    } catch (const FormatError& e) {
      send_error(res, ErrorKind::protocol, e.path(), e.what());
    } catch (const Error& e) {
      send_error(res, e.kind(), "", e.what());
    } catch (const std::exception& e) {
      send_error(res, ErrorKind::backend_unavailable, "", e.what());
    }
  }

  void configure(httplib::Server& s) {
    // httplib's default also sets SO_REUSEPORT, which would let a second
    // server bind the same port.
    s.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    const std::size_t threads = std::max<std::size_t>(cfg_.threads, 2);
    s.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    const auto io_timeout = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout).count() + 5;
    s.set_read_timeout(io_timeout, 0);
    s.set_write_timeout(io_timeout, 0);

    s.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(health().dump(), "application/json");
    });

    s.Post("/infer", [this](const httplib::Request& req, httplib::Response& res) {
      const auto t0 = Clock::now();
      guarded(res, [&] {
        InferRequest ir;
        if (req.is_multipart_form_data()) {
          if (!req.has_file("request")) throw ProtocolError("request", "multipart body lacks a request part");
          if (!req.has_file("features")) throw ProtocolError("features", "multipart body lacks a features part");
          ir = infer_request_from_multipart(parse_json_body(req.get_file_value("request").content, "request"),
                                            req.get_file_value("features").content);
        } else {
          ir = infer_request_from_json(parse_json_body(req.body));
        }
        res.set_content(to_json(process(ir, t0)).dump(), "application/json");
      });
    });

    s.Post("/judge", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto jr = judge_request_from_json(parse_json_body(req.body));
        const auto score = cfg_.judge->score(jr);
        nlohmann::json body{{"score", score.score}};
        res.set_content(body.dump(), "application/json");
      });
    });

    s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (!res.body.empty()) return;
      const auto kind = res.status == 404 ? ErrorKind::protocol : ErrorKind::transport;
      res.set_content(error_body(kind, "path", "no handler for " + req.method + " " + req.path).dump(),
                      "application/json");
    });
    s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string msg = "unexpected failure";
      try {
        if (ep) std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        msg = e.what();
      } catch (...) {
      }
      send_error(res, ErrorKind::backend_unavailable, "", msg);
    });
  }

  ServerConfig cfg_;
  std::shared_ptr<std::counting_semaphore<1 << 20>> slots_;
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
};

}  // namespace gestura::serving
