#pragma once

// Inter-rater agreement: Cohen's kappa, Matthews correlation, binary MAE.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gestura/error.hpp"

namespace gestura::metrics {

namespace detail {
template <typename A, typename B>
void require_same_length(const A& a, const B& b, const char* what) {
  if (a.size() != b.size())
    throw InvalidInput(std::string(what) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()) + ")");
  if (a.empty()) throw InvalidInput(std::string(what) + ": empty input");
}
}  // namespace detail

/// (p_o - p_e) / (1 - p_e). Computed from integer counts so equal matrices
/// give bit-identical results regardless of label order.
template <typename Label>
double cohen_kappa(std::span<const Label> a, std::span<const Label> b) {
  detail::require_same_length(a, b, "cohen_kappa");
  std::map<Label, std::int64_t> row, col;
  std::int64_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++row[a[i]];
    ++col[b[i]];
    if (a[i] == b[i]) ++agree;
  }
  const auto n = static_cast<std::int64_t>(a.size());
  std::int64_t chance = 0;
  for (const auto& [label, r] : row)
    if (auto it = col.find(label); it != col.end()) chance += r * it->second;
  const std::int64_t denom = n * n - chance;
  if (denom == 0) return 1.0;  // p_e = 1: both raters used one shared label
  return static_cast<double>(n * agree - chance) / static_cast<double>(denom);
}

template <typename Label>
double cohen_kappa(const std::vector<Label>& a, const std::vector<Label>& b) {
  return cohen_kappa(std::span<const Label>(a), std::span<const Label>(b));
}

struct BinaryConfusion {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::int64_t total() const noexcept { return tp + fp + fn + tn; }
};

/// `a` is treated as the reference, `b` as the prediction.
inline BinaryConfusion binary_confusion(std::span<const int> a, std::span<const int> b) {
  detail::require_same_length(a, b, "binary_confusion");
  BinaryConfusion m;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] != 0 && a[i] != 1) || (b[i] != 0 && b[i] != 1))
      throw InvalidInput("binary labels must be 0 or 1");
    if (a[i] == 1 && b[i] == 1) ++m.tp;
    else if (a[i] == 0 && b[i] == 1) ++m.fp;
    else if (a[i] == 1 && b[i] == 0) ++m.fn;
    else ++m.tn;
  }
  return m;
}

/// Zero when any marginal is empty.
inline double mcc(const BinaryConfusion& m) {
  const std::int64_t num = m.tp * m.tn - m.fp * m.fn;
  const std::int64_t prod = (m.tp + m.fp) * (m.tp + m.fn) * (m.tn + m.fp) * (m.tn + m.fn);
  if (prod == 0) return 0.0;
  return static_cast<double>(num) / std::sqrt(static_cast<double>(prod));
}

inline double mcc(std::span<const int> a, std::span<const int> b) { return mcc(binary_confusion(a, b)); }

/// Mean absolute difference of two binary sequences, i.e. the disagreement rate.
inline double mae_binary(std::span<const int> a, std::span<const int> b) {
  const auto m = binary_confusion(a, b);
  return static_cast<double>(m.fp + m.fn) / static_cast<double>(m.total());
}

}  // namespace gestura::metrics
