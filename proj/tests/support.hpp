#pragma once

// Helpers shared by the unit tests and the acceptance binary. Oracles here are
// deliberately naive and independent of the library code they check.

#include <array>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "gestura/dataset.hpp"
#include "gestura/landmark.hpp"
#include "gestura/projector.hpp"

namespace gestura::test {

inline std::string fixture(const std::string& name) { return std::string(GESTURA_FIXTURE_DIR) + "/" + name; }

inline std::filesystem::path temp_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() / ("gestura-test-" + tag + "-" + std::to_string(::getpid()));
  std::filesystem::create_directories(p);
  return p;
}

inline HandLandmarkFrame random_frame(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  HandLandmarkFrame f;
  f.valid = true;
  f.handedness = Handedness::right;
  for (auto& p : f.points) p = {u(rng), u(rng), u(rng)};
  return f;
}

/// Manifest with `n_classes` classes "class-NNN", each with the given clip count.
inline DatasetManifest synthetic_manifest(std::size_t n_classes, std::size_t clips_per_class) {
  DatasetManifest m;
  for (std::size_t c = 0; c < n_classes; ++c) {
    char name[16];
    std::snprintf(name, sizeof name, "class-%03zu", c);
    m.classes.push_back(name);
    for (std::size_t k = 0; k < clips_per_class; ++k) {
      ManifestClip clip;
      clip.meta.clip_id = std::string(name) + "-clip" + std::to_string(k);
      clip.meta.n_frames = 30;
      clip.meta.width = 640;
      clip.meta.height = 480;
      clip.meta.view = k % 2 ? View::exocentric : View::egocentric;
      clip.meta.class_label = name;
      m.clips.push_back(std::move(clip));
    }
  }
  return m;
}

/// Random rotation (unit quaternion), translation and uniform scale.
struct Similarity {
  std::array<std::array<double, 3>, 3> r{};
  Point3 t;
  double s = 1.0;

  Point3 apply(const Point3& p) const {
    return {s * (r[0][0] * p.x + r[0][1] * p.y + r[0][2] * p.z) + t.x,
            s * (r[1][0] * p.x + r[1][1] * p.y + r[1][2] * p.z) + t.y,
            s * (r[2][0] * p.x + r[2][1] * p.y + r[2][2] * p.z) + t.z};
  }
};

inline Similarity random_similarity(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  double q[4];
  double norm = 0.0;
  for (auto& x : q) {
    x = n(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : q) x /= norm;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Similarity s;
  s.r = {{{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
          {2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
          {2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}}};
  s.t = {u(rng), u(rng), u(rng)};
  s.s = scale(rng);
  return s;
}

inline HandLandmarkFrame transform(const HandLandmarkFrame& f, const Similarity& s) {
  HandLandmarkFrame out = f;
  for (auto& p : out.points) p = s.apply(p);
  return out;
}

/// Law of cosines from the three pairwise distances, independent of the
/// dot-product route the encoder takes.
inline double cosine_by_distances(const Point3& v, const Point3& a, const Point3& b) {
  auto d = [](const Point3& p, const Point3& q) {
    return std::sqrt((p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y) + (p.z - q.z) * (p.z - q.z));
  };
  const double da = d(v, a), db = d(v, b), ab = d(a, b);
  return (da * da + db * db - ab * ab) / (2 * da * db);
}

/// Scalar-loop projector forward pass.
inline std::vector<double> naive_projector(const std::vector<double>& v, const ProjectorParams& p, bool use_gelu) {
  auto act = [&](double x) { return use_gelu ? 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))) : x; };
  std::vector<double> h1(p.d_h), h2(p.d_h), z(p.d_z);
  for (std::size_t r = 0; r < p.d_h; ++r) {
    double s = p.b1[r];
    for (std::size_t c = 0; c < p.d_v; ++c) s += p.w1(r, c) * v[c];
    h1[r] = act(s);
  }
  for (std::size_t r = 0; r < p.d_h; ++r) {
    double s = p.b2[r];
    for (std::size_t c = 0; c < p.d_h; ++c) s += p.w2(r, c) * h1[c];
    h2[r] = act(s);
  }
  for (std::size_t r = 0; r < p.d_z; ++r) {
    double s = p.b3[r];
    for (std::size_t c = 0; c < p.d_h; ++c) s += p.w3(r, c) * h2[c];
    z[r] = s;
  }
  return z;
}

/// Worst relative error of the analytic projector gradient against central
/// differences of L = sum_i c_i z_i, over all six parameter blocks.
inline double projector_gradcheck(std::size_t dv, std::size_t dh, std::size_t dz, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto p = init_projector(dv, dh, dz, seed);
  for (auto block : p.blocks())
    for (auto& x : block) x += 0.1 * u(rng);  // non-zero biases too
  std::vector<double> v(dv), c(dz);
  for (auto& x : v) x = u(rng);
  for (auto& x : c) x = u(rng);
  auto loss = [&](const ProjectorParams& q) {
    const auto z = naive_projector(v, q, true);
    double s = 0.0;
    for (std::size_t i = 0; i < dz; ++i) s += c[i] * z[i];
    return s;
  };
  const auto g = projector_backward(v, p, c);
  const auto analytic = g.blocks();
  double worst = 0.0;
  // fourth-order central stencil; plain two-point differences drown small
  // entries in roundoff
  const double h = 1e-3;
  for (std::size_t b = 0; b < 6; ++b) {
    for (std::size_t i = 0; i < analytic[b].size(); ++i) {
      auto at = [&](double d) {
        auto q = p;
        q.blocks()[b][i] += d;
        return loss(q);
      };
      const double numeric = (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h);
      const double a = analytic[b][i];
      const double err = std::fabs(a - numeric) / std::max(1e-6, std::max(std::fabs(a), std::fabs(numeric)));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

/// Cohen's kappa straight from the textbook definition on a label map.
inline double kappa_oracle(const std::vector<int>& a, const std::vector<int>& b) {
  const double n = static_cast<double>(a.size());
  std::map<int, double> ra, rb;
  double agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ra[a[i]] += 1;
    rb[b[i]] += 1;
    agree += a[i] == b[i];
  }
  const double po = agree / n;
  double pe = 0;
  for (auto& [k, v] : ra) pe += (v / n) * (rb.count(k) ? rb[k] / n : 0.0);
  if (pe == 1.0) return 1.0;
  return (po - pe) / (1 - pe);
}

/// Pearson correlation of two 0/1 vectors (equal to MCC), 0 when either is constant.
inline double pearson_oracle(const std::vector<int>& a, const std::vector<int>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0 || sbb == 0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

/// Naive BLEU: n-grams as joined strings, clipped counts by linear scans.
inline std::vector<double> bleu_oracle(const std::vector<std::string>& cand,
                                       const std::vector<std::vector<std::string>>& refs, int max_n = 4) {
  auto grams = [](const std::vector<std::string>& t, int n) {
    std::vector<std::string> out;
    for (int i = 0; i + n <= static_cast<int>(t.size()); ++i) {
      std::string g;
      for (int k = 0; k < n; ++k) g += t[i + k] + '\x1f';
      out.push_back(g);
    }
    return out;
  };
  auto count = [](const std::vector<std::string>& v, const std::string& g) {
    int c = 0;
    for (const auto& x : v) c += x == g;
    return c;
  };
  std::vector<double> p;
  for (int n = 1; n <= max_n; ++n) {
    const auto cg = grams(cand, n);
    std::vector<std::string> seen;
    int matched = 0;
    for (const auto& g : cg) {
      bool dup = false;
      for (const auto& s : seen) dup = dup || s == g;
      if (dup) continue;
      seen.push_back(g);
      int max_ref = 0;
      for (const auto& r : refs) max_ref = std::max(max_ref, count(grams(r, n), g));
      matched += std::min(count(cg, g), max_ref);
    }
    p.push_back(cg.empty() ? 0.0 : static_cast<double>(matched) / static_cast<double>(cg.size()));
  }
  const double c = static_cast<double>(cand.size());
  double r = static_cast<double>(refs[0].size());
  for (const auto& ref : refs) {
    const double rl = static_cast<double>(ref.size());
    if (std::fabs(rl - c) < std::fabs(r - c) || (std::fabs(rl - c) == std::fabs(r - c) && rl < r)) r = rl;
  }
  const double bp = c == 0 ? 0.0 : (c > r ? 1.0 : std::exp(1.0 - r / c));
  std::vector<double> out;
  for (int n = 1; n <= max_n; ++n) {
    double prod = 1.0;
    bool zero = false;
    for (int i = 0; i < n; ++i) {
      if (p[i] == 0.0) zero = true;
      prod *= p[i];
    }
    out.push_back(zero ? 0.0 : bp * std::pow(prod, 1.0 / n));
  }
  return out;
}

/// P(T <= t) by composite Simpson integration of the t density.
inline double t_cdf_quadrature(double t, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * std::numbers::pi);
  auto pdf = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
  const double a = 0.0, b = std::fabs(t);
  const int n = 20000;
  const double h = (b - a) / n;
  double s = pdf(a) + pdf(b);
  for (int i = 1; i < n; ++i) s += pdf(a + i * h) * (i % 2 ? 4 : 2);
  const double half = s * h / 3;
  return t >= 0 ? 0.5 + half : 0.5 - half;
}

}  // namespace gestura::test
