#pragma once

// Unsmoothed BLEU-1..4 with clipped n-gram counts and brevity penalty.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gestura/error.hpp"

namespace gestura::metrics {

using Tokens = std::vector<std::string>;

/// Lowercase; every punctuation character becomes its own token.
inline Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

struct BleuComputation {
  std::size_t max_n = 4;
  std::vector<std::size_t> matches;   ///< clipped n-gram matches, per order
  std::vector<std::size_t> totals;    ///< candidate n-grams, per order
  std::vector<double> precisions;     ///< p_1..p_max_n
  std::size_t candidate_length = 0;   ///< c
  std::size_t reference_length = 0;   ///< r
  double brevity_penalty = 0.0;
  std::vector<double> scores;         ///< BLEU-1..BLEU-max_n
};

namespace detail {

inline std::map<std::vector<std::string>, std::size_t> ngram_counts(const Tokens& t, std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> out;
  if (t.size() < n) return out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++out[Tokens(t.begin() + i, t.begin() + i + n)];
  return out;
}

/// Reference length closest to `c`; ties go to the shorter one.
inline std::size_t closest_ref_length(std::size_t c, std::span<const Tokens> refs) {
  std::size_t best = refs.front().size();
  for (const auto& r : refs) {
    const auto d = [&](std::size_t x) { return x > c ? x - c : c - x; };
    if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
  }
  return best;
}

inline void finish(BleuComputation& b) {
  b.precisions.assign(b.max_n, 0.0);
  for (std::size_t n = 0; n < b.max_n; ++n)
    b.precisions[n] = b.totals[n] == 0 ? 0.0 : static_cast<double>(b.matches[n]) / static_cast<double>(b.totals[n]);
  const double c = static_cast<double>(b.candidate_length), r = static_cast<double>(b.reference_length);
  b.brevity_penalty = b.candidate_length == 0 ? 0.0 : (c > r ? 1.0 : std::exp(1.0 - r / c));
  b.scores.assign(b.max_n, 0.0);
  double log_sum = 0.0;
  for (std::size_t n = 0; n < b.max_n; ++n) {
    if (b.precisions[n] <= 0.0) break;  // this and every higher order stay 0
    log_sum += std::log(b.precisions[n]);
    b.scores[n] = b.brevity_penalty * std::exp(log_sum / static_cast<double>(n + 1));
  }
}

inline void accumulate(BleuComputation& b, const Tokens& cand, std::span<const Tokens> refs) {
  if (refs.empty()) throw InvalidInput("bleu: at least one reference is required");
  b.candidate_length += cand.size();
  b.reference_length += closest_ref_length(cand.size(), refs);
  for (std::size_t n = 1; n <= b.max_n; ++n) {
    const auto cc = ngram_counts(cand, n);
    std::map<std::vector<std::string>, std::size_t> max_ref;
    for (const auto& r : refs)
      for (const auto& [g, k] : ngram_counts(r, n)) max_ref[g] = std::max(max_ref[g], k);
    for (const auto& [g, k] : cc) {
      auto it = max_ref.find(g);
      b.matches[n - 1] += std::min(k, it == max_ref.end() ? std::size_t{0} : it->second);
      b.totals[n - 1] += k;
    }
  }
}

}  // namespace detail

/// Sentence-level BLEU of one candidate against its references.
inline BleuComputation bleu(const Tokens& candidate, std::span<const Tokens> references, std::size_t max_n = 4) {
  if (max_n == 0) throw InvalidInput("bleu: max_n must be >= 1");
  BleuComputation b;
  b.max_n = max_n;
  b.matches.assign(max_n, 0);
  b.totals.assign(max_n, 0);
  detail::accumulate(b, candidate, references);
  detail::finish(b);
  return b;
}

struct BleuPair {
  Tokens candidate;
  std::vector<Tokens> references;
};

/// Corpus-level BLEU: clipped counts and lengths are summed before the ratio.
inline BleuComputation corpus_bleu(std::span<const BleuPair> pairs, std::size_t max_n = 4) {
  if (max_n == 0) throw InvalidInput("bleu: max_n must be >= 1");
  if (pairs.empty()) throw InvalidInput("corpus_bleu: empty corpus");
  BleuComputation b;
  b.max_n = max_n;
  b.matches.assign(max_n, 0);
  b.totals.assign(max_n, 0);
  for (const auto& p : pairs) detail::accumulate(b, p.candidate, p.references);
  detail::finish(b);
  return b;
}

}  // namespace gestura::metrics
