#pragma once

// Judge scores and the thresholded semantic accuracy.

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "gestura/error.hpp"

namespace gestura::metrics {

inline constexpr int kAcceptThreshold = 4;

struct JudgeScore {
  int score = 0;  ///< 0..5
  std::optional<std::string> rationale;

  friend bool operator==(const JudgeScore&, const JudgeScore&) = default;
};

inline JudgeScore make_judge_score(int score, std::optional<std::string> rationale = std::nullopt) {
  if (score < 0 || score > 5) throw InvalidInput("judge score must be an integer in [0, 5]");
  return {score, std::move(rationale)};
}

inline bool accept(int score, int threshold = kAcceptThreshold) noexcept { return score >= threshold; }
inline bool accept(const JudgeScore& s, int threshold = kAcceptThreshold) noexcept {
  return accept(s.score, threshold);
}

/// Percentage (0..100) of scores at or above `threshold`.
inline double semantic_acc(std::span<const JudgeScore> scores, int threshold = kAcceptThreshold) {
  if (scores.empty()) throw InvalidInput("semantic_acc: no scores");
  std::size_t hits = 0;
  for (const auto& s : scores) hits += accept(s, threshold);
  return 100.0 * static_cast<double>(hits) / static_cast<double>(scores.size());
}

}  // namespace gestura::metrics
