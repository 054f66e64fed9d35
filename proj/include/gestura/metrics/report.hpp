#pragma once

// Metric report: evaluates whichever sections an input document provides and
// renders {bleu, acc, topk, agreement, bootstrap, ttest}.
//
// Input keys (all optional):
//   bleu:      {pairs: [{candidate: text, references: [text, ...]}], max_n?}
//   acc:       {scores: [int 0..5], threshold?}
//   topk:      {rows: [{category, n, hits1, hits3, hits5}], pool_size?}
//   agreement: {a: [0|1], b: [0|1]}
//   bootstrap: {samples: [number], n_resamples?, method?, confidence?}
//   ttest:     {values: [number], mu0?}

#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "gestura/error.hpp"
#include "gestura/metrics/accuracy.hpp"
#include "gestura/metrics/agreement.hpp"
#include "gestura/metrics/bleu.hpp"
#include "gestura/metrics/bootstrap.hpp"
#include "gestura/metrics/stats.hpp"
#include "gestura/metrics/topk.hpp"
#include "json.hpp"

namespace gestura::metrics {

namespace detail {

inline const nlohmann::json& require_array(const nlohmann::json& j, const std::string& section, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j[key].is_array())
    throw FormatError(section + "." + key, "missing or not an array");
  return j[key];
}

template <typename T>
std::vector<T> numbers(const nlohmann::json& arr, const std::string& where) {
  std::vector<T> out;
  for (const auto& v : arr) {
    if (!v.is_number()) throw FormatError(where, "expected numbers");
    out.push_back(v.get<T>());
  }
  return out;
}

}  // namespace detail

inline nlohmann::json evaluate_metrics(const nlohmann::json& input, std::uint64_t seed) {
  if (!input.is_object()) throw FormatError("", "metrics input must be an object");
  nlohmann::json out = nlohmann::json::object();

  if (input.contains("bleu")) {
    const auto& sec = input["bleu"];
    std::vector<BleuPair> pairs;
    for (const auto& p : detail::require_array(sec, "bleu", "pairs")) {
      if (!p.contains("candidate") || !p["candidate"].is_string() || !p.contains("references") ||
          !p["references"].is_array())
        throw FormatError("bleu.pairs", "each pair needs a candidate string and a references array");
      BleuPair bp{tokenize(p["candidate"].get<std::string>()), {}};
      for (const auto& r : p["references"]) bp.references.push_back(tokenize(r.get<std::string>()));
      pairs.push_back(std::move(bp));
    }
    const auto b = corpus_bleu(pairs, sec.value("max_n", std::size_t{4}));
    out["bleu"] = {{"scores", b.scores}, {"precisions", b.precisions}, {"brevity_penalty", b.brevity_penalty},
                   {"candidate_length", b.candidate_length}, {"reference_length", b.reference_length}};
  }

  if (input.contains("acc")) {
    const auto& sec = input["acc"];
    std::vector<JudgeScore> scores;
    for (const auto& s : detail::require_array(sec, "acc", "scores")) {
      if (!s.is_number_integer()) throw FormatError("acc.scores", "expected integers 0..5");
      scores.push_back(make_judge_score(s.get<int>()));
    }
    const int threshold = sec.value("threshold", kAcceptThreshold);
    out["acc"] = {{"accuracy", semantic_acc(scores, threshold)}, {"n", scores.size()}, {"threshold", threshold}};
  }

  if (input.contains("topk")) {
    const auto& sec = input["topk"];
    const auto table = topk_table_from_json(sec);
    out["topk"] = to_json(table);
    if (sec.contains("pool_size")) {
      nlohmann::json deltas = nlohmann::json::array();
      for (const auto& d : chance_delta_report(table, sec["pool_size"].get<std::size_t>()))
        deltas.push_back({{"k", d.k}, {"accuracy", d.accuracy}, {"chance", d.chance}, {"delta_pp", d.delta_pp}});
      out["topk"]["chance_delta"] = deltas;
    }
  }

  if (input.contains("agreement")) {
    const auto& sec = input["agreement"];
    const auto a = detail::numbers<int>(detail::require_array(sec, "agreement", "a"), "agreement.a");
    const auto b = detail::numbers<int>(detail::require_array(sec, "agreement", "b"), "agreement.b");
    out["agreement"] = {{"kappa", cohen_kappa(a, b)}, {"mcc", mcc(a, b)}, {"mae", mae_binary(a, b)}, {"n", a.size()}};
  }

  if (input.contains("bootstrap")) {
    const auto& sec = input["bootstrap"];
    const auto x = detail::numbers<double>(detail::require_array(sec, "bootstrap", "samples"), "bootstrap.samples");
    const std::string method = sec.value("method", std::string("bca"));
    if (method != "bca" && method != "percentile") throw FormatError("bootstrap.method", "must be bca or percentile");
    const auto r = bootstrap_ci(x, statistic_mean, sec.value("n_resamples", std::size_t{10000}),
                                method == "bca" ? BootstrapMethod::bca : BootstrapMethod::percentile,
                                sec.value("confidence", 0.95), seed);
    out["bootstrap"] = to_json(r);
  }

  if (input.contains("ttest")) {
    const auto& sec = input["ttest"];
    const auto x = detail::numbers<double>(detail::require_array(sec, "ttest", "values"), "ttest.values");
    const auto r = one_sample_t(x, sec.value("mu0", 0.0));
    out["ttest"] = {{"t", r.t}, {"p_two_sided", r.p_two_sided}, {"cohen_d", r.cohen_d},
                    {"mean", r.mean}, {"sd", r.sd}, {"df", r.df}};
  }
  return out;
}

/// Human-readable rendering of a report produced by evaluate_metrics.
inline std::string render_report_text(const nlohmann::json& report) {
  std::ostringstream o;
  o << std::fixed;
  if (report.contains("topk")) {
    const auto& t = report["topk"];
    o << std::left << std::setw(28) << "category" << std::right << std::setw(6) << "n" << std::setw(9) << "top1"
      << std::setw(9) << "top3" << std::setw(9) << "top5" << '\n';
    auto row = [&](const nlohmann::json& r) {
      o << std::left << std::setw(28) << r["category"].get<std::string>() << std::right << std::setw(6)
        << r["n"].get<std::size_t>() << std::setprecision(4) << std::setw(9) << r["top1"].get<double>()
        << std::setw(9) << r["top3"].get<double>() << std::setw(9) << r["top5"].get<double>() << '\n';
    };
    for (const auto& r : t["rows"]) row(r);
    row(t["overall"]);
    if (t.contains("chance_delta"))
      for (const auto& d : t["chance_delta"])
        o << "top" << d["k"].get<std::size_t>() << " vs chance " << std::setprecision(1)
          << 100.0 * d["chance"].get<double>() << "%: " << std::showpos << d["delta_pp"].get<double>()
          << std::noshowpos << " pp\n";
  }
  if (report.contains("bleu")) {
    o << "bleu";
    std::size_t n = 1;
    for (const auto& s : report["bleu"]["scores"]) o << "  B" << n++ << '=' << std::setprecision(4) << s.get<double>();
    o << '\n';
  }
  if (report.contains("acc"))
    o << "acc " << std::setprecision(2) << report["acc"]["accuracy"].get<double>() << "% (n="
      << report["acc"]["n"].get<std::size_t>() << ")\n";
  if (report.contains("agreement")) {
    const auto& a = report["agreement"];
    o << "kappa " << std::setprecision(4) << a["kappa"].get<double>() << "  mcc " << a["mcc"].get<double>()
      << "  mae " << a["mae"].get<double>() << '\n';
  }
  if (report.contains("bootstrap")) {
    const auto& b = report["bootstrap"];
    o << b["method"].get<std::string>() << " CI " << std::setprecision(4) << b["estimate"].get<double>() << " ["
      << b["low"].get<double>() << ", " << b["high"].get<double>() << "]\n";
  }
  if (report.contains("ttest")) {
    const auto& t = report["ttest"];
    o << "t(" << t["df"].get<std::size_t>() << ") = " << std::setprecision(4) << t["t"].get<double>()
      << "  p = " << t["p_two_sided"].get<double>() << "  d = " << t["cohen_d"].get<double>() << '\n';
  }
  return o.str();
}

}  // namespace gestura::metrics
