#pragma once

// Seeded bootstrap confidence intervals (percentile and BCa).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "gestura/detail/random.hpp"
#include "gestura/error.hpp"
#include "gestura/metrics/stats.hpp"
#include "json.hpp"

namespace gestura::metrics {

enum class BootstrapMethod { percentile, bca };

constexpr std::string_view to_string(BootstrapMethod m) noexcept {
  return m == BootstrapMethod::percentile ? "percentile" : "bca";
}

struct BootstrapResult {
  double estimate = 0.0;
  double low = 0.0;
  double high = 0.0;
  BootstrapMethod method = BootstrapMethod::percentile;
  std::size_t n_resamples = 0;
  std::uint64_t seed = 0;
  double confidence = 0.95;
  double z0 = 0.0;            ///< BCa bias correction (0 for percentile)
  double acceleration = 0.0;  ///< BCa acceleration (0 for percentile)
};

using Statistic = std::function<double(std::span<const double>)>;

inline double statistic_mean(std::span<const double> x) { return mean(x); }

/// Resample b draws n indices with Rng(seed).below(n), in order; the same
/// seed therefore always yields the same resample sequence.
inline std::vector<double> bootstrap_distribution(std::span<const double> samples, const Statistic& stat,
                                                  std::size_t n_resamples, std::uint64_t seed) {
  gestura::detail::Rng rng(seed);
  std::vector<double> out(n_resamples);
  std::vector<double> buf(samples.size());
  for (std::size_t b = 0; b < n_resamples; ++b) {
    for (auto& x : buf) x = samples[static_cast<std::size_t>(rng.below(samples.size()))];
    out[b] = stat(buf);
  }
  return out;
}

inline BootstrapResult bootstrap_ci(std::span<const double> samples, const Statistic& stat,
                                    std::size_t n_resamples = 10000,
                                    BootstrapMethod method = BootstrapMethod::percentile,
                                    double confidence = 0.95, std::uint64_t seed = 0) {
  if (samples.size() < 2) throw InvalidInput("bootstrap_ci: need at least two samples");
  if (n_resamples < 2) throw InvalidInput("bootstrap_ci: need at least two resamples");
  if (!(confidence > 0.0 && confidence < 1.0)) throw InvalidInput("bootstrap_ci: confidence must lie in (0, 1)");

  BootstrapResult r;
  r.method = method;
  r.n_resamples = n_resamples;
  r.seed = seed;
  r.confidence = confidence;
  r.estimate = stat(samples);

  auto dist = bootstrap_distribution(samples, stat, n_resamples, seed);
  std::sort(dist.begin(), dist.end());
  double alpha_lo = 0.5 * (1.0 - confidence);
  double alpha_hi = 1.0 - alpha_lo;

  if (method == BootstrapMethod::bca) {
    // Ties with the estimate count half, so a degenerate distribution gives z0 = 0.
    std::size_t below = 0, ties = 0;
    for (double v : dist) {
      if (v < r.estimate) ++below;
      else if (v == r.estimate) ++ties;
    }
    const double B = static_cast<double>(n_resamples);
    const double frac = std::clamp((static_cast<double>(below) + 0.5 * static_cast<double>(ties)) / B,
                                   0.5 / B, 1.0 - 0.5 / B);
    r.z0 = normal_quantile(frac);

    std::vector<double> jack(samples.size());
    std::vector<double> buf;
    buf.reserve(samples.size() - 1);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      buf.clear();
      for (std::size_t j = 0; j < samples.size(); ++j)
        if (j != i) buf.push_back(samples[j]);
      jack[i] = stat(buf);
    }
    const double jm = mean(jack);
    double num = 0.0, den = 0.0;
    for (double v : jack) {
      const double d = jm - v;
      num += d * d * d;
      den += d * d;
    }
    r.acceleration = den > 0.0 ? num / (6.0 * std::pow(den, 1.5)) : 0.0;

    auto adjust = [&](double alpha) {
      const double z = normal_quantile(alpha);
      const double s = r.z0 + z;
      return normal_cdf(r.z0 + s / (1.0 - r.acceleration * s));
    };
    alpha_lo = adjust(alpha_lo);
    alpha_hi = adjust(alpha_hi);
  }
  r.low = quantile_sorted(dist, alpha_lo);
  r.high = quantile_sorted(dist, alpha_hi);
  return r;
}

inline nlohmann::json to_json(const BootstrapResult& r) {
  return {{"estimate", r.estimate},   {"low", r.low}, {"high", r.high},
          {"method", std::string(to_string(r.method))}, {"n_resamples", r.n_resamples},
          {"seed", r.seed},           {"confidence", r.confidence}, {"z0", r.z0},
          {"acceleration", r.acceleration}};
}

}  // namespace gestura::metrics
