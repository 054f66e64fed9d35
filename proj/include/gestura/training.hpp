#pragma once

// Toy-scale two-stage training harness.
//
// Stage 1 trains only the projector on three views per clip while the video
// encoder and language model stay frozen. Stage 2 concatenates the landmark
// encoding with video features, projects them, and trains the projector and
// the language model with token cross-entropy; the encoder stays frozen.
// Freezing is enforced: updating a frozen component throws FreezeViolation.

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "gestura/dataset.hpp"
#include "gestura/detail/hash.hpp"
#include "gestura/detail/random.hpp"
#include "gestura/error.hpp"
#include "gestura/landmark.hpp"
#include "gestura/matrix.hpp"
#include "gestura/projector.hpp"
#include "json.hpp"

namespace gestura {

// ---------------------------------------------------------------------------
// Learning-rate schedule

inline constexpr double kPeakLrStage1 = 1e-3;
inline constexpr double kPeakLrStage2 = 2e-5;
inline constexpr double kWarmupRatio = 0.03;

/// ceil(ratio * total), kept inside [1, total - 1] so both the warmup start
/// (0) and the cosine end (0) are reachable.
inline std::size_t warmup_steps(std::size_t total_steps, double warmup_ratio = kWarmupRatio) {
  if (total_steps < 2) throw InvalidInput("warmup_steps: need at least 2 total steps");
  if (!(warmup_ratio > 0.0 && warmup_ratio < 1.0)) throw InvalidInput("warmup ratio must lie in (0, 1)");
  // The epsilon absorbs products like 0.03 * 100 = 3.0000000000000004.
  auto w = static_cast<std::size_t>(std::ceil(warmup_ratio * static_cast<double>(total_steps) - 1e-9));
  return std::clamp<std::size_t>(w, 1, total_steps - 1);
}

/// Linear warmup from 0 to `peak_lr`, then cosine decay to 0 at `total_steps`.
inline double lr_at(std::size_t step, std::size_t total_steps, double peak_lr,
                    double warmup_ratio = kWarmupRatio) {
  if (!(peak_lr > 0.0)) throw InvalidInput("lr_at: peak learning rate must be positive");
  if (step > total_steps) throw InvalidInput("lr_at: step " + std::to_string(step) + " beyond total " +
                                             std::to_string(total_steps));
  const std::size_t warm = warmup_steps(total_steps, warmup_ratio);
  if (step <= warm) return peak_lr * static_cast<double>(step) / static_cast<double>(warm);
  const double progress = static_cast<double>(step - warm) / static_cast<double>(total_steps - warm);
  return peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

struct TrainConfig {
  std::size_t epochs_stage1 = 1;
  std::size_t epochs_stage2 = 1;
  std::size_t batch_size = 16;
  double peak_lr_stage1 = kPeakLrStage1;
  double peak_lr_stage2 = kPeakLrStage2;
  double warmup_ratio = kWarmupRatio;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs_stage1 == 0 || epochs_stage2 == 0 || batch_size == 0)
      throw InvalidInput("train config: epochs and batch size must be positive");
    if (!(peak_lr_stage1 > 0.0) || !(peak_lr_stage2 > 0.0))
      throw InvalidInput("train config: learning rates must be positive");
    if (!(warmup_ratio > 0.0 && warmup_ratio < 1.0))
      throw InvalidInput("train config: warmup ratio must lie in (0, 1)");
  }
};

// ---------------------------------------------------------------------------
// Components

struct ComponentHandle {
  std::string name;
  bool frozen = false;
  std::string digest;
};

class Component {
 public:
  Component(std::string name, bool frozen) : name_(std::move(name)), frozen_(frozen) {}
  virtual ~Component() = default;

  const std::string& name() const noexcept { return name_; }
  bool frozen() const noexcept { return frozen_; }
  void freeze() noexcept { frozen_ = true; }
  void unfreeze() noexcept { frozen_ = false; }

  virtual std::string digest() const = 0;
  ComponentHandle handle() const { return {name_, frozen_, digest()}; }

 protected:
  void ensure_trainable() const {
    if (frozen_) throw FreezeViolation(name_);
  }

 private:
  std::string name_;
  bool frozen_;
};

/// Seeded stand-in for the pretrained video encoder: tanh(W x + b).
class VideoEncoderStub : public Component {
 public:
  VideoEncoderStub(std::size_t input_dim, std::size_t output_dim, std::uint64_t seed)
      : Component("video_encoder", true), w_(output_dim, input_dim), b_(output_dim) {
    detail::Rng rng(seed);
    const double a = std::sqrt(6.0 / static_cast<double>(input_dim + output_dim));
    for (auto& x : w_.flat()) x = rng.uniform(-a, a);
    for (auto& x : b_) x = rng.uniform(-0.1, 0.1);
  }

  std::size_t input_dim() const noexcept { return w_.cols(); }
  std::size_t output_dim() const noexcept { return w_.rows(); }

  std::vector<double> encode(std::span<const double> x) const {
    auto y = affine(w_, x, std::span<const double>(b_));
    for (auto& v : y) v = std::tanh(v);
    return y;
  }

  void apply_update(const Matrix<double>& dw, std::span<const double> db, double lr) {
    ensure_trainable();
    for (std::size_t i = 0; i < w_.size(); ++i) w_.flat()[i] -= lr * dw.flat()[i];
    for (std::size_t i = 0; i < b_.size(); ++i) b_[i] -= lr * db[i];
  }

  std::string digest() const override {
    return detail::Fnv1a{}.update(w_.flat()).update(std::span<const double>(b_)).hex();
  }

 private:
  Matrix<double> w_;
  std::vector<double> b_;
};

/// Token-scoring head over a small vocabulary: logits[t] = W z + b + P[t].
class LlmStub : public Component {
 public:
  struct Grads {
    Matrix<double> w;
    std::vector<double> b;
    Matrix<double> pos;
    std::vector<double> z;
  };

  LlmStub(std::size_t d_z, std::size_t vocab, std::size_t seq_len, std::uint64_t seed)
      : Component("llm_stub", true), w_(vocab, d_z), b_(vocab), pos_(seq_len, vocab) {
    if (vocab == 0 || vocab > 64) throw InvalidInput("llm stub: vocabulary must have 1..64 tokens");
    if (seq_len == 0) throw InvalidInput("llm stub: sequence length must be positive");
    detail::Rng rng(seed);
    const double a = std::sqrt(6.0 / static_cast<double>(vocab + d_z));
    for (auto& x : w_.flat()) x = rng.uniform(-a, a);
    for (auto& x : pos_.flat()) x = rng.uniform(-0.1, 0.1);
  }

  std::size_t vocab() const noexcept { return w_.rows(); }
  std::size_t seq_len() const noexcept { return pos_.rows(); }
  std::size_t input_dim() const noexcept { return w_.cols(); }

  Matrix<double> logits(std::span<const double> z) const {
    const auto base = affine(w_, z, std::span<const double>(b_));
    Matrix<double> out(seq_len(), vocab());
    for (std::size_t t = 0; t < seq_len(); ++t)
      for (std::size_t v = 0; v < vocab(); ++v) out(t, v) = base[v] + pos_(t, v);
    return out;
  }

  std::vector<int> argmax(std::span<const double> z) const {
    const auto l = logits(z);
    std::vector<int> out(seq_len());
    for (std::size_t t = 0; t < seq_len(); ++t) {
      const auto row = l.row(t);
      out[t] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
  }

  Grads backward(std::span<const double> z, const Matrix<double>& dlogits) const {
    Grads g{Matrix<double>(vocab(), input_dim()), std::vector<double>(vocab()), dlogits,
            std::vector<double>(input_dim())};
    for (std::size_t t = 0; t < seq_len(); ++t) {
      const auto row = dlogits.row(t);
      add_outer(g.w, 1.0, row, z);
      for (std::size_t v = 0; v < vocab(); ++v) g.b[v] += row[v];
      const auto dz = transpose_times(w_, row);
      for (std::size_t i = 0; i < dz.size(); ++i) g.z[i] += dz[i];
    }
    return g;
  }

  void apply_update(const Grads& g, double lr) {
    ensure_trainable();
    for (std::size_t i = 0; i < w_.size(); ++i) w_.flat()[i] -= lr * g.w.flat()[i];
    for (std::size_t i = 0; i < b_.size(); ++i) b_[i] -= lr * g.b[i];
    for (std::size_t i = 0; i < pos_.size(); ++i) pos_.flat()[i] -= lr * g.pos.flat()[i];
  }

  std::string digest() const override {
    return detail::Fnv1a{}.update(w_.flat()).update(std::span<const double>(b_)).update(pos_.flat()).hex();
  }

 private:
  Matrix<double> w_;
  std::vector<double> b_;
  Matrix<double> pos_;
};

class ProjectorComponent : public Component {
 public:
  explicit ProjectorComponent(ProjectorParams params, std::string name = "projector")
      : Component(std::move(name), false), params_(std::move(params)) {}

  const ProjectorParams& params() const noexcept { return params_; }

  void apply_update(const ProjectorGrads& g, double lr) {
    ensure_trainable();
    auto blocks = params_.blocks();
    const auto grads = g.blocks();
    for (std::size_t b = 0; b < blocks.size(); ++b)
      for (std::size_t i = 0; i < blocks[b].size(); ++i) blocks[b][i] -= lr * grads[b][i];
  }

  std::string digest() const override { return params_.digest(); }

 private:
  ProjectorParams params_;
};

// ---------------------------------------------------------------------------
// Losses

struct CrossEntropyResult {
  double loss = 0.0;
  Matrix<double> dlogits;  ///< d loss / d logits
};

/// Mean token-level cross-entropy of `logits` (positions x vocab) against
/// `targets`.
inline CrossEntropyResult token_cross_entropy(const Matrix<double>& logits, std::span<const int> targets) {
  if (targets.size() != logits.rows()) throw InvalidInput("cross entropy: target length mismatch");
  CrossEntropyResult r{0.0, Matrix<double>(logits.rows(), logits.cols())};
  const double inv_t = 1.0 / static_cast<double>(logits.rows());
  for (std::size_t t = 0; t < logits.rows(); ++t) {
    const auto row = logits.row(t);
    if (targets[t] < 0 || static_cast<std::size_t>(targets[t]) >= row.size())
      throw InvalidInput("cross entropy: target token out of range");
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double x : row) sum += std::exp(x - mx);
    const double log_z = mx + std::log(sum);
    r.loss += (log_z - row[static_cast<std::size_t>(targets[t])]) * inv_t;
    auto d = r.dlogits.row(t);
    for (std::size_t v = 0; v < row.size(); ++v) d[v] = std::exp(row[v] - log_z) * inv_t;
    d[static_cast<std::size_t>(targets[t])] -= inv_t;
  }
  return r;
}

namespace detail {

inline double norm(std::span<const double> a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

/// cos(a, b) and its gradients; zero when either vector vanishes.
struct CosineGrad {
  double value = 0.0;
  std::vector<double> da, db;
};

inline CosineGrad cosine_with_grad(std::span<const double> a, std::span<const double> b) {
  CosineGrad g{0.0, std::vector<double>(a.size()), std::vector<double>(b.size())};
  const double na = norm(a), nb = norm(b);
  if (na < 1e-12 || nb < 1e-12) return g;
  double ab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ab += a[i] * b[i];
  g.value = ab / (na * nb);
  for (std::size_t i = 0; i < a.size(); ++i) {
    g.da[i] = b[i] / (na * nb) - g.value * a[i] / (na * na);
    g.db[i] = a[i] / (na * nb) - g.value * b[i] / (nb * nb);
  }
  return g;
}

inline std::vector<double> mean_of(const std::array<std::vector<double>, 3>& views) {
  std::vector<double> m(views[0].size(), 0.0);
  for (const auto& v : views)
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += v[i] / 3.0;
  return m;
}

}  // namespace detail

using ViewSet = std::array<std::vector<double>, 3>;

/// combine(z_views): arithmetic mean of the three view projections.
inline std::vector<double> combine_views(const ViewSet& views) { return detail::mean_of(views); }

/// One training item for the Stage-1 objective: an anchor clip's three
/// projected views, a different-class negative's views, and the anchor's
/// text tokens.
struct AlignmentItem {
  const ViewSet* anchor = nullptr;
  const ViewSet* negative = nullptr;
  std::span<const int> text_tokens;
};

struct AlignmentGrad {
  double loss = 0.0;
  ViewSet d_anchor;
  ViewSet d_negative;
};

/// Pluggable Stage-1 objective.
class AlignmentLoss {
 public:
  virtual ~AlignmentLoss() = default;
  virtual AlignmentGrad operator()(const AlignmentItem& item, const LlmStub& llm) const = 0;
};

/// Pull each view toward the combined embedding; push the combined embedding
/// away from a negative clip's once their cosine exceeds `margin`.
class CosineEmbeddingLoss : public AlignmentLoss {
 public:
  explicit CosineEmbeddingLoss(double margin = 0.2) : margin_(margin) {}

  AlignmentGrad operator()(const AlignmentItem& item, const LlmStub&) const override {
    const auto& anchor = *item.anchor;
    const auto& negative = *item.negative;
    const std::size_t d = anchor[0].size();
    AlignmentGrad g;
    for (auto& v : g.d_anchor) v.assign(d, 0.0);
    for (auto& v : g.d_negative) v.assign(d, 0.0);

    const auto m = combine_views(anchor);
    std::vector<double> dm(d, 0.0);
    for (std::size_t v = 0; v < 3; ++v) {
      const auto c = detail::cosine_with_grad(anchor[v], m);
      g.loss += (1.0 - c.value) / 3.0;
      for (std::size_t i = 0; i < d; ++i) {
        g.d_anchor[v][i] -= c.da[i] / 3.0;
        dm[i] -= c.db[i] / 3.0;
      }
    }
    const auto mn = combine_views(negative);
    const auto c = detail::cosine_with_grad(m, mn);
    std::vector<double> dmn(d, 0.0);
    if (c.value > margin_) {
      g.loss += c.value - margin_;
      for (std::size_t i = 0; i < d; ++i) {
        dm[i] += c.da[i];
        dmn[i] += c.db[i];
      }
    }
    for (std::size_t v = 0; v < 3; ++v)
      for (std::size_t i = 0; i < d; ++i) {
        g.d_anchor[v][i] += dm[i] / 3.0;
        g.d_negative[v][i] += dmn[i] / 3.0;
      }
    return g;
  }

 private:
  double margin_;
};

/// Cross-entropy of the frozen language model's prediction from the combined
/// view embedding against the clip's text tokens.
class TokenAlignmentLoss : public AlignmentLoss {
 public:
  AlignmentGrad operator()(const AlignmentItem& item, const LlmStub& llm) const override {
    const auto& anchor = *item.anchor;
    const std::size_t d = anchor[0].size();
    const auto m = combine_views(anchor);
    const auto ce = token_cross_entropy(llm.logits(m), item.text_tokens);
    const auto back = llm.backward(m, ce.dlogits);
    AlignmentGrad g;
    g.loss = ce.loss;
    for (std::size_t v = 0; v < 3; ++v) {
      g.d_anchor[v].assign(d, 0.0);
      g.d_negative[v].assign(d, 0.0);
      for (std::size_t i = 0; i < d; ++i) g.d_anchor[v][i] = back.z[i] / 3.0;
    }
    return g;
  }
};

// ---------------------------------------------------------------------------
// Toy data

/// Whitespace word vocabulary with <pad>, <eos>, <unk>.
class ToyVocabulary {
 public:
  static constexpr int kPad = 0, kEos = 1, kUnk = 2;

  ToyVocabulary() : words_{"<pad>", "<eos>", "<unk>"} {
    for (int i = 0; i < 3; ++i) index_[words_[i]] = i;
  }

  int add(const std::string& word) {
    if (auto it = index_.find(word); it != index_.end()) return it->second;
    const int id = static_cast<int>(words_.size());
    words_.push_back(word);
    index_[word] = id;
    return id;
  }

  std::size_t size() const noexcept { return words_.size(); }
  const std::string& word(int id) const { return words_.at(static_cast<std::size_t>(id)); }

  static std::vector<std::string> split(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string w;
    while (in >> w) {
      for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      out.push_back(w);
    }
    return out;
  }

  /// Words, then <eos>, padded or truncated to `length`.
  std::vector<int> encode(const std::string& text, std::size_t length) const {
    std::vector<int> out;
    for (const auto& w : split(text)) {
      auto it = index_.find(w);
      out.push_back(it == index_.end() ? kUnk : it->second);
    }
    out.push_back(kEos);
    out.resize(length, kPad);
    return out;
  }

 private:
  std::vector<std::string> words_;
  std::map<std::string, int> index_;
};

struct ToySample {
  std::size_t label = 0;
  std::vector<double> raw;
  ViewSet views;           ///< three augmented views of `raw`
  std::size_t negative = 0;  ///< index of a different-class sample
  HandLandmarkFrame hand;
  std::vector<int> intent_tokens;
};

struct ToyDataset {
  std::size_t n_classes = 0;
  std::size_t input_dim = 0;
  std::size_t seq_len = 0;
  ToyVocabulary vocab;
  std::vector<std::string> intents;
  std::vector<ToySample> samples;
};

inline const std::vector<std::string>& toy_intents() {
  static const std::vector<std::string> intents = {
      "confirm agree",        "take a photo",         "make a phone call",    "go to next page",
      "go to previous page",  "come over",            "increase temperature", "decrease temperature"};
  return intents;
}

/// Three deterministic augmentations of a clip's raw input.
inline ViewSet generate_three_views(std::span<const double> raw, std::uint64_t seed, double jitter = 0.05) {
  ViewSet views;
  detail::Rng rng(seed);
  for (auto& v : views) {
    v.assign(raw.begin(), raw.end());
    for (auto& x : v) x += rng.normal(0.0, jitter);
  }
  return views;
}

/// Separable toy set: each class has a random prototype input and a random
/// hand pose; samples jitter both and apply a random similarity transform to
/// the hand.
inline ToyDataset make_toy_dataset(std::uint64_t seed, std::size_t n_classes = 3, std::size_t per_class = 16,
                                   std::size_t input_dim = 16, std::size_t seq_len = 4) {
  if (n_classes < 2 || n_classes > toy_intents().size())
    throw InvalidInput("toy dataset: class count must be in [2, 8]");
  if (per_class == 0 || input_dim == 0 || seq_len == 0) throw InvalidInput("toy dataset: empty dimension");
  ToyDataset ds;
  ds.n_classes = n_classes;
  ds.input_dim = input_dim;
  ds.seq_len = seq_len;
  detail::Rng rng(seed);

  std::vector<std::vector<double>> protos(n_classes, std::vector<double>(input_dim));
  std::vector<std::array<Point3, kLandmarkCount>> poses(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (auto& x : protos[c]) x = rng.normal();
    for (auto& p : poses[c]) p = {rng.uniform(), rng.uniform(), rng.uniform()};
    ds.intents.push_back(toy_intents()[c]);
    for (const auto& w : ToyVocabulary::split(ds.intents.back())) ds.vocab.add(w);
  }

  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t s = 0; s < per_class; ++s) {
      ToySample sample;
      sample.label = c;
      sample.raw = protos[c];
      for (auto& x : sample.raw) x += rng.normal(0.0, 0.1);
      sample.views = generate_three_views(sample.raw, rng.next_u64());

      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double scale = rng.uniform(0.5, 2.0);
      const Point3 shift{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
      sample.hand.valid = true;
      sample.hand.handedness = Handedness::right;
      sample.hand.frame_index = static_cast<std::uint32_t>(s);
      for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        Point3 p = poses[c][i];
        p.x += rng.normal(0.0, 0.005);
        p.y += rng.normal(0.0, 0.005);
        p.z += rng.normal(0.0, 0.005);
        const double x = std::cos(angle) * p.x - std::sin(angle) * p.y;
        const double y = std::sin(angle) * p.x + std::cos(angle) * p.y;
        sample.hand.points[i] = {scale * x + shift.x, scale * y + shift.y, scale * p.z + shift.z};
      }
      sample.intent_tokens = ds.vocab.encode(ds.intents[c], seq_len);
      ds.samples.push_back(std::move(sample));
    }
  }
  for (auto& s : ds.samples) {
    const std::size_t others = (n_classes - 1) * per_class;
    std::size_t pick = static_cast<std::size_t>(rng.below(others));
    const std::size_t first_own = s.label * per_class;
    if (pick >= first_own) pick += per_class;
    s.negative = pick;
  }
  return ds;
}

using Batch = std::vector<std::size_t>;

/// Consecutive chunks of the sample indices.
inline std::vector<Batch> make_batches(std::size_t n_samples, std::size_t batch_size) {
  if (batch_size == 0) throw InvalidInput("make_batches: batch size must be positive");
  std::vector<Batch> out;
  for (std::size_t i = 0; i < n_samples; i += batch_size) {
    Batch b;
    for (std::size_t j = i; j < std::min(n_samples, i + batch_size); ++j) b.push_back(j);
    out.push_back(std::move(b));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Schedule bookkeeping and loss trace

struct TraceRecord {
  int stage = 1;
  std::size_t epoch = 0;
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

inline nlohmann::json to_json(const TraceRecord& r) {
  return {{"stage", r.stage}, {"epoch", r.epoch}, {"step", r.step}, {"lr", r.lr}, {"loss", r.loss}};
}

/// One JSON object per line.
inline void write_loss_trace(std::ostream& out, std::span<const TraceRecord> trace) {
  for (const auto& r : trace) out << to_json(r).dump() << '\n';
}

class StageSchedule {
 public:
  StageSchedule(int stage, double peak_lr, std::size_t total_steps, double warmup_ratio = kWarmupRatio)
      : stage_(stage), peak_lr_(peak_lr), total_(total_steps), warmup_ratio_(warmup_ratio) {
    warmup_steps(total_steps, warmup_ratio);  // validates
  }

  int stage() const noexcept { return stage_; }
  std::size_t step() const noexcept { return step_; }
  std::size_t total_steps() const noexcept { return total_; }
  double current_lr() const { return lr_at(step_, total_, peak_lr_, warmup_ratio_); }

  /// Records one update and advances the step counter.
  void record(std::size_t epoch, double lr, double loss, std::vector<TraceRecord>* trace) {
    if (trace) trace->push_back({stage_, epoch, step_, lr, loss});
    ++step_;
  }

 private:
  int stage_;
  double peak_lr_;
  std::size_t total_;
  double warmup_ratio_;
  std::size_t step_ = 0;
};

// ---------------------------------------------------------------------------
// Stage 1

struct ViewProjection {
  std::size_t sample = 0;
  ViewSet z_views;
  std::vector<double> combined;
};

struct Stage1EpochReport {
  std::size_t epoch = 0;
  std::vector<double> batch_losses;
  double mean_loss = 0.0;
  std::vector<ViewProjection> projections;
};

namespace detail {

inline ViewSet project_views(const ViewSet& raw_views, const VideoEncoderStub& encoder,
                             const ProjectorParams& p, ViewSet* encoded = nullptr) {
  ViewSet z;
  for (std::size_t v = 0; v < 3; ++v) {
    auto feat = encoder.encode(raw_views[v]);
    z[v] = projector_forward(feat, p);
    if (encoded) (*encoded)[v] = std::move(feat);
  }
  return z;
}

}  // namespace detail

/// One Stage-1 epoch: for each batch, project three views per clip, combine,
/// score with `loss`, and take one gradient step on the projector only.
inline Stage1EpochReport run_stage1_epoch(const ToyDataset& data, std::span<const Batch> batches,
                                          ProjectorComponent& projector, const VideoEncoderStub& encoder,
                                          const LlmStub& llm, const AlignmentLoss& loss,
                                          StageSchedule& schedule, std::size_t epoch,
                                          std::vector<TraceRecord>* trace = nullptr) {
  if (!encoder.frozen() || !llm.frozen())
    throw InvalidInput("stage 1 requires a frozen video encoder and language model");
  Stage1EpochReport report;
  report.epoch = epoch;
  for (const auto& batch : batches) {
    if (batch.empty()) continue;
    const auto& params = projector.params();
    ProjectorGrads grads(params);
    double batch_loss = 0.0;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (std::size_t idx : batch) {
      const auto& sample = data.samples.at(idx);
      const auto& neg = data.samples.at(sample.negative);
      ViewSet anchor_in, neg_in;
      const auto anchor_z = detail::project_views(sample.views, encoder, params, &anchor_in);
      const auto neg_z = detail::project_views(neg.views, encoder, params, &neg_in);
      const auto g = loss({&anchor_z, &neg_z, sample.intent_tokens}, llm);
      batch_loss += g.loss * inv_b;
      for (std::size_t v = 0; v < 3; ++v) {
        auto da = g.d_anchor[v];
        for (auto& x : da) x *= inv_b;
        grads += projector_backward(anchor_in[v], params, da);
        auto dn = g.d_negative[v];
        for (auto& x : dn) x *= inv_b;
        grads += projector_backward(neg_in[v], params, dn);
      }
      report.projections.push_back({idx, anchor_z, combine_views(anchor_z)});
    }
    const double lr = schedule.current_lr();
    projector.apply_update(grads, lr);
    schedule.record(epoch, lr, batch_loss, trace);
    report.batch_losses.push_back(batch_loss);
  }
  double sum = 0.0;
  for (double l : report.batch_losses) sum += l;
  report.mean_loss = report.batch_losses.empty() ? 0.0 : sum / static_cast<double>(report.batch_losses.size());
  return report;
}

/// Mean cosine between combined projections of same-class pairs minus that of
/// different-class pairs. Positive means classes occupy separate directions.
inline double class_alignment_margin(const ToyDataset& data, const ProjectorParams& p,
                                     const VideoEncoderStub& encoder) {
  std::vector<std::vector<double>> z;
  for (const auto& s : data.samples) z.push_back(combine_views(detail::project_views(s.views, encoder, p)));
  double same = 0.0, diff = 0.0;
  std::size_t n_same = 0, n_diff = 0;
  for (std::size_t i = 0; i < z.size(); ++i)
    for (std::size_t j = i + 1; j < z.size(); ++j) {
      const double c = detail::cosine_with_grad(z[i], z[j]).value;
      if (data.samples[i].label == data.samples[j].label) {
        same += c;
        ++n_same;
      } else {
        diff += c;
        ++n_diff;
      }
    }
  if (n_same == 0 || n_diff == 0) return 0.0;
  return same / static_cast<double>(n_same) - diff / static_cast<double>(n_diff);
}

// ---------------------------------------------------------------------------
// Stage 2

inline constexpr std::string_view kDefaultCotQuestion =
    "Please describe the gesture in detail and provide its meaning or intent.";

/// Stage-2 instruction prompt: one placeholder marker per projected feature
/// row, the question, and the required <think>/<answer> response format.
inline std::string build_cot_prompt(std::span<const std::vector<double>> projected_features,
                                    std::string_view question) {
  std::string out = "<video>";
  for (std::size_t i = 0; i < projected_features.size(); ++i)
    out += "<feat:" + std::to_string(i) + ":" + std::to_string(projected_features[i].size()) + ">";
  out += "</video>\n";
  out += question;
  out += "\nReason step by step from the gesture's appearance to its intent. Write your reasoning "
         "enclosed in <think>...</think>, and conclude with the inferred gesture meaning enclosed in "
         "<answer>...</answer>.\n";
  out += "For example:\n";
  out += kCotExampleResponse;
  out += "\n";
  return out;
}

struct Stage2StepReport {
  double loss = 0.0;
  double lr = 0.0;
  std::size_t concat_length = 0;
  std::string prompt;  ///< prompt built for the first sample of the batch
  ComponentHandle encoder_before, encoder_after;
  ComponentHandle llm_before, llm_after;
  ComponentHandle projector_before, projector_after;
};

/// One Stage-2 update on `batch`: landmark encoding ++ video features ->
/// projector -> language model -> token cross-entropy against the intent.
inline Stage2StepReport run_stage2_step(const ToyDataset& data, const Batch& batch,
                                        ProjectorComponent& projector, const VideoEncoderStub& encoder,
                                        LlmStub& llm, StageSchedule& schedule, std::size_t epoch,
                                        std::vector<TraceRecord>* trace = nullptr,
                                        std::string_view question = kDefaultCotQuestion) {
  if (!encoder.frozen()) throw InvalidInput("stage 2 requires a frozen video encoder");
  if (batch.empty()) throw InvalidInput("stage 2: empty batch");
  Stage2StepReport r;
  r.encoder_before = encoder.handle();
  r.llm_before = llm.handle();
  r.projector_before = projector.handle();

  const auto& params = projector.params();
  ProjectorGrads pgrads(params);
  LlmStub::Grads lgrads{Matrix<double>(llm.vocab(), llm.input_dim()), std::vector<double>(llm.vocab()),
                        Matrix<double>(llm.seq_len(), llm.vocab()), {}};
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto& sample = data.samples.at(batch[n]);
    const auto ground = encode_landmarks(sample.hand);
    const auto video = encoder.encode(sample.raw);
    const auto concat = concat_ground(ground.values, video);
    r.concat_length = concat.size();
    const auto z = projector_forward(concat, params);
    if (n == 0) r.prompt = build_cot_prompt(std::span<const std::vector<double>>(&z, 1), question);
    auto ce = token_cross_entropy(llm.logits(z), sample.intent_tokens);
    r.loss += ce.loss * inv_b;
    for (auto& x : ce.dlogits.flat()) x *= inv_b;
    const auto lg = llm.backward(z, ce.dlogits);
    for (std::size_t i = 0; i < lg.w.size(); ++i) lgrads.w.flat()[i] += lg.w.flat()[i];
    for (std::size_t i = 0; i < lg.b.size(); ++i) lgrads.b[i] += lg.b[i];
    for (std::size_t i = 0; i < lg.pos.size(); ++i) lgrads.pos.flat()[i] += lg.pos.flat()[i];
    pgrads += projector_backward(concat, params, lg.z);
  }
  r.lr = schedule.current_lr();
  llm.apply_update(lgrads, r.lr);
  projector.apply_update(pgrads, r.lr);
  schedule.record(epoch, r.lr, r.loss, trace);

  r.encoder_after = encoder.handle();
  r.llm_after = llm.handle();
  r.projector_after = projector.handle();
  return r;
}

// ---------------------------------------------------------------------------
// Whole toy run

struct ToyModelDims {
  std::size_t d_v = 16;
  std::size_t d_h = 32;
  std::size_t d_z = 8;
};

struct ToyRun {
  std::vector<TraceRecord> trace;
  std::vector<double> stage1_epoch_loss;
  std::vector<double> stage2_epoch_loss;
  ComponentHandle encoder_initial, encoder_after_stage1, encoder_final;
  ComponentHandle llm_initial, llm_after_stage1, llm_final;
  ComponentHandle projector_initial, projector_after_stage1;
  ComponentHandle ground_initial, ground_final;
  double margin_before = 0.0;
  double margin_after = 0.0;
  ProjectorParams projector;
  ProjectorParams ground_projector;
};

/// Stage 1 then Stage 2 on `data`, fully determined by `config.seed`.
inline ToyRun run_toy_training(const TrainConfig& config, const ToyDataset& data, ToyModelDims dims = {}) {
  config.validate();
  ToyRun run;
  VideoEncoderStub encoder(data.input_dim, dims.d_v, config.seed ^ 0x5eedULL);
  LlmStub llm(dims.d_z, data.vocab.size(), data.seq_len, config.seed ^ 0x11ULL);
  ProjectorComponent projector(init_projector(dims.d_v, dims.d_h, dims.d_z, config.seed));

  encoder.freeze();
  llm.freeze();
  run.encoder_initial = encoder.handle();
  run.llm_initial = llm.handle();
  run.projector_initial = projector.handle();
  run.margin_before = class_alignment_margin(data, projector.params(), encoder);

  const auto batches = make_batches(data.samples.size(), config.batch_size);
  StageSchedule s1(1, config.peak_lr_stage1, std::max<std::size_t>(2, config.epochs_stage1 * batches.size()),
                   config.warmup_ratio);
  const CosineEmbeddingLoss loss;
  for (std::size_t e = 0; e < config.epochs_stage1; ++e) {
    const auto rep = run_stage1_epoch(data, batches, projector, encoder, llm, loss, s1, e + 1, &run.trace);
    run.stage1_epoch_loss.push_back(rep.mean_loss);
  }
  run.encoder_after_stage1 = encoder.handle();
  run.llm_after_stage1 = llm.handle();
  run.projector_after_stage1 = projector.handle();
  run.margin_after = class_alignment_margin(data, projector.params(), encoder);
  run.projector = projector.params();

  llm.unfreeze();
  ProjectorComponent ground(init_projector(kLandmarkFeatureDim + dims.d_v, dims.d_h, dims.d_z, config.seed + 1),
                            "ground_projector");
  run.ground_initial = ground.handle();
  StageSchedule s2(2, config.peak_lr_stage2, std::max<std::size_t>(2, config.epochs_stage2 * batches.size()),
                   config.warmup_ratio);
  for (std::size_t e = 0; e < config.epochs_stage2; ++e) {
    double sum = 0.0;
    for (const auto& b : batches) sum += run_stage2_step(data, b, ground, encoder, llm, s2, e + 1, &run.trace).loss;
    run.stage2_epoch_loss.push_back(sum / static_cast<double>(batches.size()));
  }
  run.encoder_final = encoder.handle();
  run.llm_final = llm.handle();
  run.ground_final = ground.handle();
  run.ground_projector = ground.params();
  return run;
}

}  // namespace gestura
