#pragma once

// Three-layer GELU projector
//   z = W3 GELU(W2 GELU(W1 v + b1) + b2) + b3
// with its analytic gradient, seeded initialisation and a binary checkpoint.

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "gestura/detail/hash.hpp"
#include "gestura/detail/random.hpp"
#include "gestura/error.hpp"
#include "gestura/matrix.hpp"

namespace gestura {

/// Exact GELU, x * Phi(x).
inline double gelu(double x) noexcept {
  return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

inline double gelu_derivative(double x) noexcept {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

/// `identity` exists so tests can check the affine skeleton on its own.
enum class Activation { gelu, identity };

struct ProjectorParams {
  std::size_t d_v = 0, d_h = 0, d_z = 0;
  std::uint64_t seed = 0;
  Matrix<double> w1, w2, w3;
  std::vector<double> b1, b2, b3;

  ProjectorParams() = default;
  ProjectorParams(std::size_t dv, std::size_t dh, std::size_t dz)
      : d_v(dv), d_h(dh), d_z(dz), w1(dh, dv), w2(dh, dh), w3(dz, dh), b1(dh), b2(dh), b3(dz) {}

  void validate() const {
    const bool ok = w1.rows() == d_h && w1.cols() == d_v && b1.size() == d_h && w2.rows() == d_h &&
                    w2.cols() == d_h && b2.size() == d_h && w3.rows() == d_z && w3.cols() == d_h &&
                    b3.size() == d_z;
    if (!ok) throw InvalidInput("projector: inconsistent parameter dimensions");
  }

  /// Blocks in checkpoint order: W1, b1, W2, b2, W3, b3.
  std::array<std::span<double>, 6> blocks() {
    return {w1.flat(), std::span<double>(b1), w2.flat(), std::span<double>(b2), w3.flat(),
            std::span<double>(b3)};
  }
  std::array<std::span<const double>, 6> blocks() const {
    return {w1.flat(), std::span<const double>(b1), w2.flat(), std::span<const double>(b2),
            w3.flat(), std::span<const double>(b3)};
  }

  std::string digest() const {
    detail::Fnv1a h;
    h.update(std::uint64_t{d_v}).update(std::uint64_t{d_h}).update(std::uint64_t{d_z});
    for (auto b : blocks()) h.update(b);
    return h.hex();
  }

  friend bool operator==(const ProjectorParams&, const ProjectorParams&) = default;
};

inline constexpr std::array<const char*, 6> kProjectorBlockNames = {"W1", "b1", "W2", "b2", "W3", "b3"};

/// Weights uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)); biases zero.
inline ProjectorParams init_projector(std::size_t d_v, std::size_t d_h, std::size_t d_z,
                                      std::uint64_t seed) {
  if (d_v == 0 || d_h == 0 || d_z == 0) throw InvalidInput("init_projector: zero dimension");
  ProjectorParams p(d_v, d_h, d_z);
  p.seed = seed;
  detail::Rng rng(seed);
  auto fill = [&](Matrix<double>& m) {
    const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (auto& x : m.flat()) x = rng.uniform(-a, a);
  };
  fill(p.w1);
  fill(p.w2);
  fill(p.w3);
  return p;
}

struct ProjectorActivations {
  std::vector<double> a1, h1, a2, h2, z;
};

inline double activate(Activation act, double x) noexcept {
  return act == Activation::gelu ? gelu(x) : x;
}
inline double activate_derivative(Activation act, double x) noexcept {
  return act == Activation::gelu ? gelu_derivative(x) : 1.0;
}

inline ProjectorActivations projector_forward_full(std::span<const double> v, const ProjectorParams& p,
                                                   Activation act = Activation::gelu) {
  p.validate();
  if (v.size() != p.d_v) {
    throw InvalidInput("projector_forward: input has " + std::to_string(v.size()) +
                       " features, expected " + std::to_string(p.d_v));
  }
  ProjectorActivations s;
  s.a1 = affine(p.w1, v, std::span<const double>(p.b1));
  s.h1.resize(s.a1.size());
  for (std::size_t i = 0; i < s.a1.size(); ++i) s.h1[i] = activate(act, s.a1[i]);
  s.a2 = affine(p.w2, std::span<const double>(s.h1), std::span<const double>(p.b2));
  s.h2.resize(s.a2.size());
  for (std::size_t i = 0; i < s.a2.size(); ++i) s.h2[i] = activate(act, s.a2[i]);
  s.z = affine(p.w3, std::span<const double>(s.h2), std::span<const double>(p.b3));
  return s;
}

inline std::vector<double> projector_forward(std::span<const double> v, const ProjectorParams& p,
                                             Activation act = Activation::gelu) {
  return projector_forward_full(v, p, act).z;
}

/// Gradients with the same shapes as the parameters, plus d/dv.
struct ProjectorGrads {
  Matrix<double> w1, w2, w3;
  std::vector<double> b1, b2, b3;
  std::vector<double> v;

  explicit ProjectorGrads(const ProjectorParams& p)
      : w1(p.d_h, p.d_v), w2(p.d_h, p.d_h), w3(p.d_z, p.d_h), b1(p.d_h), b2(p.d_h), b3(p.d_z),
        v(p.d_v) {}

  std::array<std::span<const double>, 6> blocks() const {
    return {w1.flat(), std::span<const double>(b1), w2.flat(), std::span<const double>(b2),
            w3.flat(), std::span<const double>(b3)};
  }

  ProjectorGrads& operator+=(const ProjectorGrads& o) {
    auto add = [](std::span<double> a, std::span<const double> b) {
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    add(w1.flat(), o.w1.flat());
    add(w2.flat(), o.w2.flat());
    add(w3.flat(), o.w3.flat());
    add(b1, o.b1);
    add(b2, o.b2);
    add(b3, o.b3);
    add(v, o.v);
    return *this;
  }
};

/// Backpropagates `upstream` = dL/dz through the projector.
inline ProjectorGrads projector_backward(std::span<const double> v, const ProjectorParams& p,
                                         std::span<const double> upstream,
                                         Activation act = Activation::gelu) {
  const auto s = projector_forward_full(v, p, act);
  if (upstream.size() != p.d_z) throw InvalidInput("projector_backward: upstream gradient has wrong size");
  ProjectorGrads g(p);

  g.b3.assign(upstream.begin(), upstream.end());
  add_outer(g.w3, 1.0, upstream, std::span<const double>(s.h2));

  auto da2 = transpose_times(p.w3, upstream);
  for (std::size_t i = 0; i < da2.size(); ++i) da2[i] *= activate_derivative(act, s.a2[i]);
  g.b2 = da2;
  add_outer(g.w2, 1.0, std::span<const double>(da2), std::span<const double>(s.h1));

  auto da1 = transpose_times(p.w2, std::span<const double>(da2));
  for (std::size_t i = 0; i < da1.size(); ++i) da1[i] *= activate_derivative(act, s.a1[i]);
  g.b1 = da1;
  add_outer(g.w1, 1.0, std::span<const double>(da1), v);

  g.v = transpose_times(p.w1, std::span<const double>(da1));
  return g;
}

/// C = [G; v]. Ground features first.
inline std::vector<double> concat_ground(std::span<const double> ground, std::span<const double> video) {
  for (double x : ground)
    if (!std::isfinite(x)) throw InvalidInput("concat_ground: non-finite ground feature");
  for (double x : video)
    if (!std::isfinite(x)) throw InvalidInput("concat_ground: non-finite video feature");
  std::vector<double> out;
  out.reserve(ground.size() + video.size());
  out.insert(out.end(), ground.begin(), ground.end());
  out.insert(out.end(), video.begin(), video.end());
  return out;
}

// Checkpoint: d_v, d_h, d_z, seed as u64 LE, then W1,b1,W2,b2,W3,b3 as f64 LE row-major.

inline std::string serialize_projector(const ProjectorParams& p) {
  p.validate();
  std::string out;
  auto put64 = [&](std::uint64_t x) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
  };
  put64(p.d_v);
  put64(p.d_h);
  put64(p.d_z);
  put64(p.seed);
  for (auto block : p.blocks())
    for (double x : block) put64(std::bit_cast<std::uint64_t>(x));
  return out;
}

inline ProjectorParams deserialize_projector(std::string_view bytes) {
  std::size_t pos = 0;
  auto get64 = [&]() -> std::uint64_t {
    if (pos + 8 > bytes.size()) throw FormatError("checkpoint", "truncated");
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i)
      x |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 8;
    return x;
  };
  const auto dv = get64(), dh = get64(), dz = get64();
  const auto seed = get64();
  constexpr std::uint64_t kMaxDim = 1u << 16;
  if (dv == 0 || dh == 0 || dz == 0 || dv > kMaxDim || dh > kMaxDim || dz > kMaxDim)
    throw FormatError("checkpoint", "implausible dimensions");
  ProjectorParams p(dv, dh, dz);
  p.seed = seed;
  for (auto block : p.blocks())
    for (double& x : block) x = std::bit_cast<double>(get64());
  if (pos != bytes.size()) throw FormatError("checkpoint", "trailing bytes");
  return p;
}

inline void write_projector_checkpoint(const std::string& path, const ProjectorParams& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path, "cannot open for writing");
  const auto bytes = serialize_projector(p);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline ProjectorParams read_projector_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path, "cannot open file");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_projector(bytes);
}

}  // namespace gestura
