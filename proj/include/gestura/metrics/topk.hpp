#pragma once

// Per-category top-k hit tables and chance-corrected deltas.

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gestura/error.hpp"
#include "json.hpp"

namespace gestura::metrics {

inline constexpr std::array<std::size_t, 3> kTopK = {1, 3, 5};

struct TopKRow {
  std::string category;
  std::size_t n_samples = 0;
  std::size_t hits1 = 0, hits3 = 0, hits5 = 0;

  std::size_t hits(std::size_t k) const {
    switch (k) {
      case 1: return hits1;
      case 3: return hits3;
      case 5: return hits5;
      default: throw InvalidInput("top-k: k must be 1, 3 or 5");
    }
  }
  double accuracy(std::size_t k) const {
    return n_samples == 0 ? 0.0 : static_cast<double>(hits(k)) / static_cast<double>(n_samples);
  }
};

struct TopKTable {
  std::vector<TopKRow> rows;
  TopKRow overall{"overall", 0, 0, 0, 0};
};

struct RankedSample {
  std::string category;
  std::optional<std::size_t> rank;  ///< 1-based rank of the true intent; empty if absent
};

inline void check_row(const TopKRow& r) {
  if (!(r.hits1 <= r.hits3 && r.hits3 <= r.hits5 && r.hits5 <= r.n_samples))
    throw InvalidInput("top-k row '" + r.category + "': need hits@1 <= hits@3 <= hits@5 <= n");
}

/// Builds the table from rows of counts; the overall row is the column sum.
inline TopKTable topk_table_from_counts(std::vector<TopKRow> rows) {
  TopKTable t;
  for (const auto& r : rows) {
    check_row(r);
    t.overall.n_samples += r.n_samples;
    t.overall.hits1 += r.hits1;
    t.overall.hits3 += r.hits3;
    t.overall.hits5 += r.hits5;
  }
  t.rows = std::move(rows);
  return t;
}

/// Categories appear in sorted order.
inline TopKTable topk_table(std::span<const RankedSample> samples) {
  std::map<std::string, TopKRow> by_cat;
  for (const auto& s : samples) {
    if (s.rank && *s.rank == 0) throw InvalidInput("top-k: ranks are 1-based");
    auto& r = by_cat[s.category];
    r.category = s.category;
    ++r.n_samples;
    if (s.rank) {
      r.hits1 += *s.rank <= 1;
      r.hits3 += *s.rank <= 3;
      r.hits5 += *s.rank <= 5;
    }
  }
  std::vector<TopKRow> rows;
  for (auto& [_, r] : by_cat) rows.push_back(std::move(r));
  return topk_table_from_counts(std::move(rows));
}

struct ChanceDelta {
  std::size_t k = 0;
  double accuracy = 0.0;
  double chance = 0.0;
  double delta_pp = 0.0;
};

/// accuracy@k against a uniform guess over `pool_size` intents.
inline std::vector<ChanceDelta> chance_delta_report(const TopKTable& table, std::size_t pool_size) {
  if (pool_size < 5) throw InvalidInput("chance_delta_report: pool size must be >= 5");
  std::vector<ChanceDelta> out;
  for (std::size_t k : kTopK) {
    ChanceDelta d;
    d.k = k;
    d.accuracy = table.overall.accuracy(k);
    d.chance = static_cast<double>(k) / static_cast<double>(pool_size);
    d.delta_pp = 100.0 * (d.accuracy - d.chance);
    out.push_back(d);
  }
  return out;
}

inline nlohmann::json to_json(const TopKRow& r) {
  return {{"category", r.category}, {"n", r.n_samples}, {"hits1", r.hits1}, {"hits3", r.hits3},
          {"hits5", r.hits5},       {"top1", r.accuracy(1)}, {"top3", r.accuracy(3)}, {"top5", r.accuracy(5)}};
}

inline nlohmann::json to_json(const TopKTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows) rows.push_back(to_json(r));
  return {{"rows", rows}, {"overall", to_json(t.overall)}};
}

/// Accepts {"rows": [{category, n, hits1, hits3, hits5}, ...]}.
inline TopKTable topk_table_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("rows") || !j["rows"].is_array())
    throw FormatError("rows", "expected an object with a 'rows' array");
  std::vector<TopKRow> rows;
  for (std::size_t i = 0; i < j["rows"].size(); ++i) {
    const auto& r = j["rows"][i];
    const std::string where = "rows[" + std::to_string(i) + "]";
    auto count = [&](const char* f) -> std::size_t {
      if (!r.contains(f) || !r[f].is_number_unsigned()) throw FormatError(where + "." + f, "missing or not a count");
      return r[f].get<std::size_t>();
    };
    if (!r.contains("category") || !r["category"].is_string()) throw FormatError(where + ".category", "missing");
    rows.push_back({r["category"].get<std::string>(), count("n"), count("hits1"), count("hits3"), count("hits5")});
  }
  return topk_table_from_counts(std::move(rows));
}

}  // namespace gestura::metrics
