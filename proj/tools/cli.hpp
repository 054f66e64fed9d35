#pragma once

// Command-line front end. `run` is the whole program so tests can drive it
// without spawning processes. Exit codes: 0 success, 1 operation error,
// 2 usage error.

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "gestura/gestura.hpp"
#include "json.hpp"

namespace gestura::cli {

using nlohmann::json;

namespace detail {

inline std::atomic<bool> g_stop{false};

inline void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError(path, "cannot open for writing");
  f << text;
}

inline std::string read_text(const std::string& path) {
  if (path == "-") {
    std::ostringstream s;
    s << std::cin.rdbuf();
    return s.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path, "cannot open file");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline HandSelection parse_hand(const std::string& s) {
  if (s == "left") return HandSelection::left;
  if (s == "right") return HandSelection::right;
  return HandSelection::first;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ','))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::string dump(const json& j) { return j.dump() + "\n"; }

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"gestura: hand-gesture understanding toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  bool pretty = false;
  app.add_flag("--pretty", pretty, "Human-readable tables instead of JSON");

  // encode-landmarks
  std::string lm_input, lm_output, lm_hand = "first";
  auto* encode = app.add_subcommand("encode-landmarks", "Encode a landmark file into 1024-value rows, one per frame");
  encode->add_option("--input,-i", lm_input, "Landmark JSON file")->required();
  encode->add_option("--output,-o", lm_output, "Output path (default stdout)");
  encode->add_option("--hand", lm_hand, "Hand to encode when two are tracked")->check(CLI::IsMember({"first", "left", "right"}));

  // sample-frames
  std::uint32_t sf_frames = 0, sf_k = kFramesPerClip, sf_width = 0, sf_height = 0;
  std::string sf_clip;
  auto* sample = app.add_subcommand("sample-frames", "Frame indices and crop rectangle for a clip");
  auto* sf_n_opt = sample->add_option("--n-frames", sf_frames, "Frames in the clip");
  sample->add_option("--k", sf_k, "Frames to sample");
  sample->add_option("--width", sf_width, "Frame width");
  sample->add_option("--height", sf_height, "Frame height");
  auto* sf_clip_opt = sample->add_option("--clip", sf_clip, "Clip manifest JSON");
  sf_n_opt->excludes(sf_clip_opt);

  // split-dataset
  std::string sp_manifest, sp_output;
  std::uint64_t seed = 0;
  double sp_open = 0.10, sp_closed = 0.10;
  auto* split = app.add_subcommand("split-dataset", "Open-set / closed-set split of a dataset manifest");
  split->add_option("--manifest,-m", sp_manifest, "Dataset manifest JSON")->required();
  split->add_option("--seed", seed, "Random seed")->required();
  split->add_option("--open-fraction", sp_open, "Fraction of classes held out");
  split->add_option("--closed-fraction", sp_closed, "Fraction of clips per retained class for testing");
  split->add_option("--output,-o", sp_output, "Output path (default stdout)");

  // validate-dataset
  std::string vd_manifest, vd_captions, vd_cot;
  auto* validate = app.add_subcommand("validate-dataset", "Check a manifest and optional caption / reasoning corpora");
  validate->add_option("--manifest,-m", vd_manifest, "Dataset manifest JSON");
  validate->add_option("--captions", vd_captions, "Caption records, one JSON or dict literal per line");
  validate->add_option("--cot", vd_cot, "Reasoning corpus JSONL {clip_id, prompt, trace}");

  // parse-cot
  std::string pc_input = "-";
  auto* parse_cot_cmd = app.add_subcommand("parse-cot", "Parse a <think>/<answer> trace");
  parse_cot_cmd->add_option("--input,-i", pc_input, "Trace file (default stdin)");

  // eval-metrics
  std::string em_input, em_output;
  auto* eval = app.add_subcommand("eval-metrics", "Compute the metric report for an input document");
  eval->add_option("--input,-i", em_input, "Metrics input JSON")->required();
  eval->add_option("--seed", seed, "Bootstrap seed")->required();
  eval->add_option("--output,-o", em_output, "Output path (default stdout)");

  // train-toy
  TrainConfig tc;
  tc.epochs_stage1 = 5;
  tc.epochs_stage2 = 2;
  std::string tt_trace, tt_checkpoint;
  auto* train = app.add_subcommand("train-toy", "Run both training stages on the toy data set");
  train->add_option("--seed", tc.seed, "Random seed")->required();
  train->add_option("--epochs1", tc.epochs_stage1, "Stage-1 epochs");
  train->add_option("--epochs2", tc.epochs_stage2, "Stage-2 epochs");
  train->add_option("--batch-size", tc.batch_size, "Batch size");
  train->add_option("--lr1", tc.peak_lr_stage1, "Stage-1 peak learning rate");
  train->add_option("--lr2", tc.peak_lr_stage2, "Stage-2 peak learning rate");
  train->add_option("--warmup-ratio", tc.warmup_ratio, "Warmup fraction of total steps");
  train->add_option("--trace", tt_trace, "Write the per-step loss trace (JSONL)");
  train->add_option("--checkpoint", tt_checkpoint, "Write the Stage-1 projector checkpoint");

  // serve
  std::string sv_host = "127.0.0.1";
  int sv_port = 8080;
  int sv_comm = 0, sv_infer = 0, sv_tts = 0, sv_timeout = 30000;
  bool sv_field = false;
  double sv_duration = 0.0;
  auto* serve = app.add_subcommand("serve", "Run the inference server with the mock backend");
  serve->add_option("--host", sv_host, "Bind address");
  serve->add_option("--port", sv_port, "Port (0 picks a free one)");
  serve->add_option("--comm-ms", sv_comm, "Simulated transfer delay");
  serve->add_option("--infer-ms", sv_infer, "Simulated inference delay");
  serve->add_option("--tts-ms", sv_tts, "Simulated speech delay");
  serve->add_flag("--field-delays", sv_field, "comm 5230 ms, infer 1600 ms, tts 1000 ms");
  serve->add_option("--timeout-ms", sv_timeout, "Per-request deadline");
  serve->add_option("--duration-s", sv_duration, "Stop after this many seconds (default: until interrupted)");

  // client-send / bench-latency share request options
  std::string cs_server, cs_clip, cs_landmarks, cs_features, cs_pool, cs_hand = "first";
  auto add_request_opts = [&](CLI::App* sub) {
    sub->add_option("--server", cs_server, "host:port of the inference server")->required();
    sub->add_option("--clip", cs_clip, "Clip manifest JSON")->required();
    sub->add_option("--landmarks", cs_landmarks, "Landmark JSON file");
    sub->add_option("--features", cs_features, "GSTR file with 8 x 257 x 1024 vision tokens");
    sub->add_option("--pool", cs_pool, "Comma-separated intent labels");
    sub->add_option("--hand", cs_hand, "Hand to encode")->check(CLI::IsMember({"first", "left", "right"}));
  };
  auto* client = app.add_subcommand("client-send", "Send one clip to the server");
  add_request_opts(client);
  std::size_t bl_requests = 20, bl_concurrency = 1;
  auto* bench = app.add_subcommand("bench-latency", "Latency statistics over repeated requests");
  add_request_opts(bench);
  bench->add_option("--requests,-n", bl_requests, "Number of requests");
  bench->add_option("--concurrency,-c", bl_concurrency, "Requests in flight");

  // judge-agreement
  std::string ja_input;
  int ja_variants = 3;
  auto* agree = app.add_subcommand(
      "judge-agreement", "Judge-vs-human agreement (kappa, MCC, MAE) and prompt-variant stability");
  agree->add_option("--input,-i", ja_input, "JSON {items: [{prediction, gold, human}]}")->required();
  agree->add_option("--variants", ja_variants, "Prompt variants for the stability probe");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*encode) {
      const auto clip = read_landmark_file(lm_input);
      std::ostringstream o;
      for (const auto& f : select_hand(clip, detail::parse_hand(lm_hand))) {
        const auto v = encode_landmarks(f);
        if (pretty) {
          o << "frame " << f.frame_index << (v.valid ? "" : " (invalid)") << "  degenerate=" << v.degenerate_count
            << "  first=" << std::setprecision(6) << v.values[0] << '\n';
        } else {
          o << json{{"frame_index", f.frame_index}, {"valid", v.valid},
                    {"degenerate_count", v.degenerate_count}, {"values", v.values}}
                   .dump()
            << '\n';
        }
      }
      detail::write_output(lm_output, o.str(), out);
      return 0;
    }

    if (*sample) {
      ClipMeta meta;
      if (!sf_clip.empty()) {
        meta = clip_meta_from_json(read_json_file(sf_clip));
      } else {
        if (sf_frames == 0) throw InvalidInput("give --n-frames or --clip");
        meta.n_frames = sf_frames;
        meta.width = sf_width;
        meta.height = sf_height;
      }
      json j{{"indices", sample_frame_indices(meta.n_frames, sf_k)}};
      if (meta.width > 0 && meta.height > 0) {
        const auto g = center_crop_geometry(meta.width, meta.height);
        j["crop"] = {{"scale", g.scale}, {"scaled_width", g.scaled_width}, {"scaled_height", g.scaled_height},
                     {"x", g.x}, {"y", g.y}, {"side", g.side}};
      }
      out << (pretty ? j.dump(2) + "\n" : detail::dump(j));
      return 0;
    }

    if (*split) {
      const auto m = manifest_from_json(read_json_file(sp_manifest));
      if (auto v = manifest_violations(m); !v.empty()) throw FormatError(sp_manifest, v.front());
      const auto s = split_dataset(m, seed, sp_open, sp_closed);
      if (pretty) {
        std::ostringstream o;
        o << "open-set classes (" << s.open_set_classes.size() << "):";
        for (const auto& c : s.open_set_classes) o << ' ' << c;
        o << '\n';
        for (const auto& [cls, cs] : s.assignments)
          o << std::left << std::setw(32) << cls << " train " << cs.train.size() << "  test " << cs.closed_test.size()
            << '\n';
        detail::write_output(sp_output, o.str(), out);
      } else {
        detail::write_output(sp_output, to_json(s).dump(2) + "\n", out);
      }
      return 0;
    }

    if (*validate) {
      if (vd_manifest.empty() && vd_captions.empty() && vd_cot.empty())
        throw InvalidInput("give at least one of --manifest, --captions, --cot");
      json report = json::object();
      std::size_t problems = 0;
      if (!vd_manifest.empty()) {
        const auto m = manifest_from_json(read_json_file(vd_manifest));
        const auto v = manifest_violations(m);
        const auto st = manifest_stats(m);
        problems += v.size();
        report["manifest"] = {{"violations", v},
                              {"stats", {{"samples", st.n_samples}, {"classes", st.n_classes},
                                         {"caption_types", st.n_caption_types}, {"egocentric", st.egocentric},
                                         {"exocentric", st.exocentric}}}};
      }
      if (!vd_captions.empty()) {
        std::istringstream in(detail::read_text(vd_captions));
        std::string line;
        std::size_t n = 0, ok = 0;
        json issues = json::array();
        while (std::getline(in, line)) {
          ++n;
          if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
          try {
            const auto v = validate_caption_record(parse_caption_text(line));
            if (v.empty()) ++ok;
            for (const auto& x : v) issues.push_back({{"line", n}, {"message", x.message()}});
          } catch (const Error& e) {
            issues.push_back({{"line", n}, {"message", e.what()}});
          }
        }
        problems += issues.size();
        report["captions"] = {{"valid_records", ok}, {"issues", issues}};
      }
      if (!vd_cot.empty()) {
        std::istringstream in(detail::read_text(vd_cot));
        const auto r = read_cot_corpus(in);
        json issues = json::array();
        for (const auto& i : r.issues) issues.push_back({{"line", i.line}, {"message", i.message}});
        problems += r.issues.size();
        report["cot"] = {{"valid_records", r.records.size()}, {"issues", issues}};
      }
      report["ok"] = problems == 0;
      out << (pretty ? report.dump(2) + "\n" : detail::dump(report));
      if (problems) {
        err << "error[format]: " << problems << " problem(s) found\n";
        return 1;
      }
      return 0;
    }

    if (*parse_cot_cmd) {
      try {
        const auto t = parse_cot(detail::read_text(pc_input));
        const json j{{"think", t.think}, {"answer", t.answer}};
        out << (pretty ? "think:  " + t.think + "\nanswer: " + t.answer + "\n" : detail::dump(j));
        return 0;
      } catch (const CotParseError& e) {
        out << detail::dump(json{{"error", {{"kind", "parse"}, {"violation", std::string(to_string(e.violation()))},
                                            {"offset", e.offset()}, {"message", e.what()}}}});
        err << "error[parse]: " << e.what() << "\n";
        return 1;
      }
    }

    if (*eval) {
      const auto report = metrics::evaluate_metrics(read_json_file(em_input), seed);
      detail::write_output(em_output, pretty ? metrics::render_report_text(report) : report.dump(2) + "\n", out);
      return 0;
    }

    if (*train) {
      const auto data = make_toy_dataset(tc.seed);
      const auto r = run_toy_training(tc, data);
      if (!tt_trace.empty()) {
        std::ofstream f(tt_trace, std::ios::binary);
        if (!f) throw FormatError(tt_trace, "cannot open for writing");
        write_loss_trace(f, r.trace);
      }
      if (!tt_checkpoint.empty()) write_projector_checkpoint(tt_checkpoint, r.projector);
      const json j{{"seed", tc.seed},
                   {"stage1_epoch_loss", r.stage1_epoch_loss},
                   {"stage2_epoch_loss", r.stage2_epoch_loss},
                   {"alignment_margin", {{"before", r.margin_before}, {"after", r.margin_after}}},
                   {"digests",
                    {{"video_encoder", {r.encoder_initial.digest, r.encoder_after_stage1.digest, r.encoder_final.digest}},
                     {"llm_stub", {r.llm_initial.digest, r.llm_after_stage1.digest, r.llm_final.digest}},
                     {"projector", {r.projector_initial.digest, r.projector_after_stage1.digest}},
                     {"ground_projector", {r.ground_initial.digest, r.ground_final.digest}}}},
                   {"steps", r.trace.size()}};
      if (pretty) {
        out << "stage 1 loss by epoch:";
        for (double l : r.stage1_epoch_loss) out << ' ' << std::setprecision(6) << l;
        out << "\nstage 2 loss by epoch:";
        for (double l : r.stage2_epoch_loss) out << ' ' << std::setprecision(6) << l;
        out << "\nalignment margin: " << r.margin_before << " -> " << r.margin_after << '\n';
      } else {
        out << j.dump(2) << '\n';
      }
      return 0;
    }

    if (*serve) {
      serving::MockBackendConfig mc{std::chrono::milliseconds(sv_comm), std::chrono::milliseconds(sv_infer),
                           std::chrono::milliseconds(sv_tts), 64};
      if (sv_field) mc = serving::MockBackendConfig::field_trial();
      serving::ServerConfig sc;
      sc.host = sv_host;
      sc.port = sv_port;
      sc.backend = std::make_shared<serving::MockBackend>(mc);
      sc.judge = judge_from_environment();
      sc.timeout = std::chrono::milliseconds(sv_timeout);
      serving::InferenceServer server(sc);
      server.start();
      out << detail::dump(json{{"listening", sv_host + ":" + std::to_string(server.port())},
                               {"backend", "mock"}}) << std::flush;
      detail::g_stop = false;
      std::signal(SIGINT, [](int) { detail::g_stop = true; });
      std::signal(SIGTERM, [](int) { detail::g_stop = true; });
      const auto start = std::chrono::steady_clock::now();
      while (!detail::g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        if (sv_duration > 0 &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >= sv_duration)
          break;
      }
      server.stop();
      return 0;
    }

    if (*client || *bench) {
      // Everything local is parsed before any network activity.
      serving::ClientSendInputs in;
      in.clip = clip_meta_from_json(read_json_file(cs_clip));
      if (!cs_landmarks.empty()) in.landmarks = read_landmark_file(cs_landmarks);
      if (!cs_features.empty()) in.vision_features = serving::read_tensor_file(cs_features);
      in.intent_pool = detail::split_list(cs_pool);
      in.hand = detail::parse_hand(cs_hand);
      const auto req = serving::build_infer_request(in);
      serving::ClientConfig cc{parse_endpoint(cs_server)};
      if (*client) {
        const auto resp = serving::send_infer(cc, req);
        if (pretty) {
          out << "clip:        " << resp.clip_id << "\ndescription: " << resp.description
              << "\nmeaning:     " << resp.meaning << "\nintention:   " << resp.intention << '\n';
          for (std::size_t i = 0; i < resp.ranked_intents.size(); ++i)
            out << "  " << i + 1 << ". " << resp.ranked_intents[i].label << " (" << resp.ranked_intents[i].score << ")\n";
          out << std::fixed << std::setprecision(1) << "latency ms: comm " << resp.latency.comm_ms << "  infer "
              << resp.latency.infer_ms << "  tts " << resp.latency.tts_ms << "  total " << resp.latency.total_ms << '\n';
        } else {
          out << detail::dump(serving::to_json(resp));
        }
        return 0;
      }
      const auto rep = serving::bench_latency(cc, req, bl_requests, bl_concurrency);
      if (pretty) {
        out << std::fixed << std::setprecision(1) << "requests " << rep.n_ok << " ok, " << rep.n_errors << " failed\n";
        auto row = [&](const char* name, const serving::PhaseStats& s) {
          out << std::left << std::setw(7) << name << std::right << " mean " << std::setw(9) << s.mean << "  p50 "
              << std::setw(9) << s.p50 << "  p95 " << std::setw(9) << s.p95 << '\n';
        };
        row("comm", rep.comm);
        row("infer", rep.infer);
        row("tts", rep.tts);
        row("total", rep.total);
      } else {
        out << detail::dump(serving::to_json(rep));
      }
      return rep.n_errors == 0 ? 0 : 1;
    }

    if (*agree) {
      const auto doc = read_json_file(ja_input);
      if (!doc.contains("items") || !doc["items"].is_array() || doc["items"].empty())
        throw FormatError("items", "missing or empty array");
      std::vector<JudgeRequest> reqs;
      std::vector<int> human;
      for (std::size_t i = 0; i < doc["items"].size(); ++i) {
        const auto& it = doc["items"][i];
        const std::string where = "items[" + std::to_string(i) + "]";
        if (!it.contains("prediction") || !it["prediction"].is_string() || !it.contains("gold") ||
            !it["gold"].is_string())
          throw FormatError(where, "needs prediction and gold strings");
        if (!it.contains("human") || !it["human"].is_number_integer() ||
            (it["human"].get<int>() != 0 && it["human"].get<int>() != 1))
          throw FormatError(where + ".human", "must be 0 or 1");
        reqs.push_back({it["prediction"].get<std::string>(), it["gold"].get<std::string>(), 0});
        human.push_back(it["human"].get<int>());
      }
      auto backend = judge_from_environment();
      CachingJudge judge(backend);
      std::vector<int> verdicts;
      for (const auto& s : score_all(reqs, judge, 4)) verdicts.push_back(metrics::accept(s) ? 1 : 0);
      const auto probe = stability_probe(reqs, judge, ja_variants);
      double mean_g = 0, mean_h = 0;
      for (std::size_t i = 0; i < human.size(); ++i) {
        mean_g += verdicts[i];
        mean_h += human[i];
      }
      mean_g /= static_cast<double>(human.size());
      mean_h /= static_cast<double>(human.size());
      const json j{{"judge", backend->kind()},
                   {"n", human.size()},
                   {"kappa", metrics::cohen_kappa(verdicts, human)},
                   {"mcc", metrics::mcc(verdicts, human)},
                   {"mae", metrics::mae_binary(verdicts, human)},
                   {"leniency", mean_g - mean_h},
                   {"variant_acceptance", probe.acceptance_rates},
                   {"variant_std", probe.std_of_rates}};
      out << (pretty ? j.dump(2) + "\n" : detail::dump(j));
      return 0;
    }
  } catch (const CotParseError& e) {
    err << "error[parse]: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error[" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << "error[format]: " << e.what() << "\n";
    return 1;
  }
  err << "usage error: no subcommand\n";
  return 2;
}

}  // namespace gestura::cli
