// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstring>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gestura/gestura.hpp"
#include "gestura/serving/bench.hpp"
#include "gestura/serving/server.hpp"
#include "support.hpp"

using namespace gestura;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool ok = true;
  std::string detail;

  void fail(const std::string& why) {
    if (ok) detail.clear();
    ok = false;
    if (!detail.empty()) detail += "; ";
    detail += why;
  }
  void note(const std::string& s) {
    if (ok) detail = s;
  }
};

std::string fmt(double x, int prec = 6) {
  std::ostringstream o;
  o.precision(prec);
  o << x;
  return o.str();
}

int failures = 0;

void criterion(const std::string& name, const std::function<void(Outcome&)>& body) {
  Outcome o;
  try {
    body(o);
  } catch (const std::exception& e) {
    o.fail(std::string("exception: ") + e.what());
  }
  if (!o.ok) ++failures;
  std::cout << (o.ok ? "PASS " : "FAIL ") << name << (o.detail.empty() ? "" : "  [" + o.detail + "]") << std::endl;
}

void triplets(Outcome& o) {
  const auto t0 = Clock::now();
  const auto all = enumerate_triplets(21);
  if (all.size() != 1330) o.fail("enumerate_triplets(21) gave " + std::to_string(all.size()));
  std::size_t n = 0;
  for (int i = 0; i < 21; ++i)
    for (int j = i + 1; j < 21; ++j)
      for (int k = j + 1; k < 21; ++k, ++n)
        if (n < all.size() && !(all[n].i == i && all[n].j == j && all[n].k == k))
          o.fail("triplet " + std::to_string(n) + " out of lexicographic order");
  const auto used = encoder_triplets();
  if (used.size() != 1024) o.fail("encoder uses " + std::to_string(used.size()));
  for (std::size_t t = 0; t < used.size(); ++t)
    if (!(used[t] == all[t])) o.fail("encoder triplet " + std::to_string(t) + " is not the prefix");
  std::mt19937_64 rng(1);
  const auto f = test::random_frame(rng);
  const auto v = encode_landmarks(f);
  for (std::size_t t = 0; t < 1024; ++t) {
    const auto& tr = all[t];
    if (std::fabs(v.values[t] - test::cosine_by_distances(f.points[tr.i], f.points[tr.j], f.points[tr.k])) > 1e-9)
      o.fail("value " + std::to_string(t) + " is not the cosine of triplet " + std::to_string(t));
  }
  const double s = seconds_since(t0);
  if (s >= 1.0) o.fail("took " + fmt(s) + " s");
  o.note("1330 triplets, prefix 1024, " + fmt(s * 1000, 3) + " ms");
}

void invariance(Outcome& o) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20);
  double worst = 0;
  for (int f = 0; f < 1000; ++f) {
    const auto frame = test::random_frame(rng);
    const auto base = encode_landmarks(frame);
    for (int t = 0; t < 100; ++t) {
      const auto moved = encode_landmarks(test::transform(frame, test::random_similarity(rng)));
      for (std::size_t i = 0; i < kLandmarkFeatureDim; ++i)
        worst = std::max(worst, std::fabs(moved.values[i] - base.values[i]));
    }
  }
  const double s = seconds_since(t0);
  if (worst > 1e-9) o.fail("max drift " + fmt(worst));
  if (s >= 30.0) o.fail("took " + fmt(s) + " s");
  o.note("max drift " + fmt(worst, 3) + ", " + fmt(s, 3) + " s");
}

void token_assembly(Outcome& o) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(-10, 10);
  std::vector<Matrix<float>> vision;
  std::vector<LandmarkFeatureVector> lms;
  for (int f = 0; f < 8; ++f) {
    Matrix<float> m(kVisionTokens, kTokenDim);
    for (auto& x : m.flat()) x = u(rng);
    vision.push_back(std::move(m));
    auto frame = test::random_frame(rng);
    frame.valid = f != 5;
    lms.push_back(encode_landmarks(frame));
  }
  for (int f = 0; f < 8; ++f) {
    const auto t = assemble_frame_tokens(vision[f], lms[f]);
    if (t.rows() != 258 || t.cols() != 1024) o.fail("frame shape " + std::to_string(t.rows()) + "x" + std::to_string(t.cols()));
    if (std::memcmp(t.flat().data(), vision[f].flat().data(), vision[f].size() * sizeof(float)) != 0)
      o.fail("vision prefix differs in frame " + std::to_string(f));
    for (std::size_t c = 0; c < kTokenDim; ++c)
      if (t(257, c) != static_cast<float>(lms[f].values[c])) o.fail("landmark row differs");
  }
  const auto block = assemble_clip_tokens<float>(vision, lms);
  if (block.n_frames != 8 || block.tokens != 258 || block.dim != 1024) o.fail("clip block shape");
  for (std::size_t f = 0; f < 8; ++f)
    if (std::memcmp(block.token(f, 0).data(), vision[f].flat().data(), vision[f].size() * sizeof(float)) != 0)
      o.fail("clip block vision prefix differs in frame " + std::to_string(f));
  o.note("8 frames of 258x1024, vision prefix byte-identical");
}

void gradcheck(Outcome& o) {
  std::mt19937_64 rng(77);
  std::vector<std::array<std::size_t, 3>> shapes{{16, 32, 8}, {1, 1, 1}, {16, 1, 8}, {1, 32, 1}};
  while (shapes.size() < 24)
    shapes.push_back({std::uniform_int_distribution<std::size_t>(1, 16)(rng),
                      std::uniform_int_distribution<std::size_t>(1, 32)(rng),
                      std::uniform_int_distribution<std::size_t>(1, 8)(rng)});
  double worst = 0;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto [dv, dh, dz] = shapes[i];
    const double e = test::projector_gradcheck(dv, dh, dz, 1000 + i);
    worst = std::max(worst, e);
    if (e > 1e-5)
      o.fail("(" + std::to_string(dv) + "," + std::to_string(dh) + "," + std::to_string(dz) + ") rel err " + fmt(e));
  }
  o.note(std::to_string(shapes.size()) + " configurations, worst rel err " + fmt(worst, 3));
}

void freeze_contracts(Outcome& o) {
  const auto data = make_toy_dataset(42);
  {
    VideoEncoderStub enc(data.input_dim, 16, 1);
    LlmStub llm(8, data.vocab.size(), data.seq_len, 2);
    ProjectorComponent proj(init_projector(16, 32, 8, 3));
    enc.freeze();
    llm.freeze();
    const auto batches = make_batches(data.samples.size(), 16);
    StageSchedule sched(1, kPeakLrStage1, batches.size());
    const CosineEmbeddingLoss loss;
    const auto e0 = enc.digest(), l0 = llm.digest(), p0 = proj.digest();
    run_stage1_epoch(data, batches, proj, enc, llm, loss, sched, 1);
    if (enc.digest() != e0) o.fail("stage 1 changed the encoder");
    if (llm.digest() != l0) o.fail("stage 1 changed the LLM stub");
    if (proj.digest() == p0) o.fail("stage 1 left the projector unchanged");
  }
  TrainConfig cfg;
  cfg.seed = 42;
  cfg.epochs_stage1 = 5;
  cfg.epochs_stage2 = 2;
  const auto run = run_toy_training(cfg, data);
  if (run.encoder_initial.digest != run.encoder_after_stage1.digest || run.encoder_initial.digest != run.encoder_final.digest)
    o.fail("encoder digest changed");
  if (run.llm_initial.digest != run.llm_after_stage1.digest) o.fail("LLM stub changed during stage 1");
  if (run.llm_after_stage1.digest == run.llm_final.digest) o.fail("stage 2 left the LLM stub unchanged");
  if (run.projector_initial.digest == run.projector_after_stage1.digest) o.fail("stage 1 left the projector unchanged");
  if (run.ground_initial.digest == run.ground_final.digest) o.fail("stage 2 left the ground projector unchanged");
  const auto& l = run.stage1_epoch_loss;
  if (l.size() != 5) o.fail("expected 5 stage-1 epochs");
  for (std::size_t e = 1; e < l.size(); ++e)
    if (!(l[e] < l[e - 1])) o.fail("stage-1 loss rose at epoch " + std::to_string(e + 1));
  std::string losses;
  for (double x : l) losses += (losses.empty() ? "" : " ") + fmt(x, 5);
  o.note("stage-1 loss " + losses);
}

void lr_schedule(Outcome& o) {
  for (double peak : {kPeakLrStage1, kPeakLrStage2, 1.0}) {
    for (std::size_t T : {2u, 10u, 34u, 100u, 101u, 1000u, 12345u}) {
      const auto W = warmup_steps(T, kWarmupRatio);
      const std::string at = " (T=" + std::to_string(T) + ", peak " + fmt(peak) + ")";
      if (lr_at(0, T, peak) != 0.0) o.fail("lr at step 0 is nonzero" + at);
      if (lr_at(W, T, peak) != peak) o.fail("lr at warmup end is " + fmt(lr_at(W, T, peak), 17) + at);
      if (lr_at(T, T, peak) > 1e-12) o.fail("final lr " + fmt(lr_at(T, T, peak)) + at);
      // continuity: no jump larger than the steepest slope of either branch
      const double bound = peak * std::max(1.0 / static_cast<double>(W),
                                           std::numbers::pi / (2.0 * static_cast<double>(T - W))) + 1e-15;
      for (std::size_t s = 1; s <= T; ++s) {
        const double d = std::fabs(lr_at(s, T, peak) - lr_at(s - 1, T, peak));
        if (d > bound) {
          o.fail("jump of " + fmt(d) + " at step " + std::to_string(s) + at);
          break;
        }
      }
      // the cosine branch evaluated at the junction lands on the peak too
      const double cos_at_w = peak * 0.5 * (1.0 + std::cos(0.0));
      if (cos_at_w != lr_at(W, T, peak)) o.fail("branches disagree at the junction" + at);
    }
  }
  TrainConfig cfg;
  if (cfg.peak_lr_stage1 != 1e-3 || cfg.peak_lr_stage2 != 2e-5 || cfg.warmup_ratio != 0.03)
    o.fail("default hyperparameters differ from 1e-3 / 2e-5 / 0.03");
  o.note("lr(0)=0, lr(W)=peak, lr(T)=" + fmt(lr_at(1000, 1000, 1e-3), 3));
}

void bleu_oracle_cases(Outcome& o) {
  struct Case {
    std::string cand;
    std::vector<std::string> refs;
  };
  const std::vector<Case> cases{
      {"the cat is on the mat", {"the cat is on the mat"}},
      {"the the the the the the the", {"the cat is on the mat", "there is a cat on the mat"}},
      {"the cat", {"the cat is on the mat"}},
      {"a b c d", {"e f g h"}},
      {"the cat sat on the mat", {"the cat is on the mat", "a cat sat on a mat"}},
      {"raise the thumb to show approval", {"thumb up means approval", "a raised thumb shows approval"}},
      {"wave the hand left and right", {"wave hello with the hand", "the hand waves left and right to greet"}},
      {"go to the next page", {"go to next page"}},
      {"go to next page please now", {"go to next page"}},
      {"make a phone call", {"make a call", "phone someone", "make a phone call now"}},
      {"a a a b b b", {"a b a b a b"}},
      {"one two three four five", {"one two three four", "one two three four five six"}},
      {"x y z", {"x y", "x y z w"}},
      {"ok sign means okay", {"the ok sign means everything is okay"}},
      {"point at the door", {"point to the door", "pointing at a door"}},
      {"stop", {"stop"}},
      {"stop now", {"stop"}},
      {"come over here quickly please", {"come over", "beckon someone to come over here"}},
      {"it is fine , thanks !", {"it is fine thanks"}},
      {"decrease the temperature of the air conditioner", {"turn down the air conditioner", "decrease temp of ac"}},
  };
  double worst = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto cand = metrics::tokenize(cases[i].cand);
    std::vector<metrics::Tokens> refs;
    for (const auto& r : cases[i].refs) refs.push_back(metrics::tokenize(r));
    const auto got = metrics::bleu(cand, refs, 4);
    const auto want = test::bleu_oracle(cand, refs, 4);
    for (std::size_t n = 0; n < 4; ++n) {
      const double e = std::fabs(got.scores[n] - want[n]);
      worst = std::max(worst, e);
      if (e > 1e-9) o.fail("case " + std::to_string(i) + " BLEU-" + std::to_string(n + 1) + " " + fmt(got.scores[n]) +
                           " vs " + fmt(want[n]));
    }
  }
  const auto same = metrics::tokenize("the thumb is raised upward");
  const std::vector<metrics::Tokens> same_refs{same};
  for (std::size_t n = 0; n < 4; ++n)
    if (metrics::bleu(same, same_refs).scores[n] != 1.0) o.fail("identical sentence does not score 1");
  const std::vector<metrics::Tokens> other{metrics::tokenize("nothing in common here")};
  for (std::size_t n = 0; n < 4; ++n)
    if (metrics::bleu(same, other).scores[n] != 0.0) o.fail("disjoint sentence does not score 0");
  o.note(std::to_string(cases.size()) + " cases, worst diff " + fmt(worst, 3));
}

void topk_reproduction(Outcome& o) {
  const auto doc = read_json_file(test::fixture("topk_counts.json"));
  const auto table = metrics::topk_table_from_json(doc["topk"]);
  const double want[3] = {0.3750, 0.5769, 0.6923};
  const double want_delta[3] = {27.5, 27.7, 19.2};
  const std::size_t ks[3] = {1, 3, 5};
  std::string got;
  for (int i = 0; i < 3; ++i) {
    const double a = table.overall.accuracy(ks[i]);
    got += (i ? " / " : "") + fmt(a, 4);
    if (std::fabs(a - want[i]) > 5e-5) o.fail("top-" + std::to_string(ks[i]) + " " + fmt(a, 8));
  }
  const auto deltas = metrics::chance_delta_report(table, 10);
  for (int i = 0; i < 3; ++i)
    if (std::fabs(deltas[i].delta_pp - want_delta[i]) > 0.1)
      o.fail("delta@" + std::to_string(ks[i]) + " " + fmt(deltas[i].delta_pp));
  o.note("top-1/3/5 " + got + ", deltas " + fmt(deltas[0].delta_pp, 3) + " / " + fmt(deltas[1].delta_pp, 3) + " / " +
         fmt(deltas[2].delta_pp, 3) + " pp");
}

void agreement(Outcome& o) {
  std::size_t matrices = 0;
  for (int n = 1; n <= 6; ++n)
    for (int tp = 0; tp <= n; ++tp)
      for (int fp = 0; tp + fp <= n; ++fp)
        for (int fn = 0; tp + fp + fn <= n; ++fn) {
          const int tn = n - tp - fp - fn;
          std::vector<int> ref, pred;
          auto add = [&](int r, int p, int c) {
            for (int i = 0; i < c; ++i) {
              ref.push_back(r);
              pred.push_back(p);
            }
          };
          add(1, 1, tp);
          add(0, 1, fp);
          add(1, 0, fn);
          add(0, 0, tn);
          ++matrices;
          const double k = metrics::cohen_kappa(ref, pred), kw = test::kappa_oracle(ref, pred);
          const double m = metrics::mcc(ref, pred), mw = test::pearson_oracle(ref, pred);
          const std::string at = " at tp=" + std::to_string(tp) + " fp=" + std::to_string(fp) +
                                 " fn=" + std::to_string(fn) + " tn=" + std::to_string(tn);
          if (std::fabs(k - kw) > 1e-12) o.fail("kappa " + fmt(k) + " vs " + fmt(kw) + at);
          if (std::fabs(m - mw) > 1e-12) o.fail("mcc " + fmt(m) + " vs " + fmt(mw) + at);
        }
  std::mt19937_64 rng(9);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t len = std::uniform_int_distribution<std::size_t>(1, 64)(rng);
    std::vector<int> a(len), b(len);
    std::size_t disagree = 0;
    for (std::size_t i = 0; i < len; ++i) {
      a[i] = static_cast<int>(rng() & 1);
      b[i] = static_cast<int>(rng() & 1);
      disagree += a[i] != b[i];
    }
    const double mae = metrics::mae_binary(a, b);
    if (mae != static_cast<double>(disagree) / static_cast<double>(len)) {
      o.fail("mae differs from disagreement rate on pair " + std::to_string(t));
      break;
    }
  }
  o.note(std::to_string(matrices) + " confusion matrices, 1000 MAE pairs");
}

void bootstrap(Outcome& o) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(3.0, 2.0);
  std::vector<double> x(40);
  for (auto& v : x) v = nd(rng);
  for (auto method : {metrics::BootstrapMethod::percentile, metrics::BootstrapMethod::bca}) {
    const auto a = metrics::bootstrap_ci(x, metrics::statistic_mean, 2000, method, 0.95, 11);
    const auto b = metrics::bootstrap_ci(x, metrics::statistic_mean, 2000, method, 0.95, 11);
    if (a.low != b.low || a.high != b.high) o.fail(std::string(to_string(method)) + " bounds differ across runs");
  }

  std::size_t covered = 0;
  const int trials = 500;
  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 r(100000 + t);
    std::vector<double> s(60);
    for (auto& v : s) v = nd(r);
    const auto ci = metrics::bootstrap_ci(s, metrics::statistic_mean, 1000, metrics::BootstrapMethod::percentile, 0.95,
                                          static_cast<std::uint64_t>(t));
    covered += ci.low <= 3.0 && 3.0 <= ci.high;
  }
  const double coverage = static_cast<double>(covered) / trials;
  if (coverage < 0.92) o.fail("coverage " + fmt(coverage));

  // Balanced symmetric samples, where the exact bootstrap has z0 = 0 and a = 0.
  // Tolerance is 0.02 of the statistic's SD (the exact bootstrap SD of the mean);
  // the resample count keeps Monte Carlo noise in z0 well below that.
  double gap_worst = 0;
  std::vector<std::vector<double>> symmetric(2);
  for (int k = 0; k < 10; ++k) {
    symmetric[0].push_back(1.0);
    symmetric[0].push_back(-1.0);
  }
  for (int k = 1; k <= 50; ++k) {
    symmetric[1].push_back(k / 50.0);
    symmetric[1].push_back(-k / 50.0);
  }
  for (const auto& sym : symmetric) {
    double ss = 0;
    const double mu = metrics::mean(sym);
    for (double v : sym) ss += (v - mu) * (v - mu);
    const double n = static_cast<double>(sym.size());
    const double stat_sd = std::sqrt(ss / n) / std::sqrt(n);
    const auto p = metrics::bootstrap_ci(sym, metrics::statistic_mean, 200000, metrics::BootstrapMethod::percentile, 0.95, 3);
    const auto q = metrics::bootstrap_ci(sym, metrics::statistic_mean, 200000, metrics::BootstrapMethod::bca, 0.95, 3);
    const double gap = std::max(std::fabs(p.low - q.low), std::fabs(p.high - q.high));
    gap_worst = std::max(gap_worst, gap / stat_sd);
    if (gap > 0.02 * stat_sd)
      o.fail("BCa vs percentile gap " + fmt(gap) + " > " + fmt(0.02 * stat_sd) + " (n=" + std::to_string(sym.size()) + ")");
  }

  const double s = seconds_since(t0);
  if (s >= 60.0) o.fail("took " + fmt(s) + " s");
  o.note("coverage " + fmt(coverage, 4) + ", BCa gap " + fmt(gap_worst, 3) + " SD, " + fmt(s, 3) + " s");
}

void cot_grammar(Outcome& o) {
  std::mt19937_64 rng(8);
  const std::vector<std::string> words{"the", "thumb", "is", "raised,", "palm", "faces", "out;", "index\nfinger",
                                       "points", "up.", "(maybe)", "approval", "\"ok\"", "42", "tab\there", "a>b"};
  for (int i = 0; i < 50; ++i) {
    auto phrase = [&] {
      std::string s;
      const int n = std::uniform_int_distribution<int>(1, 30)(rng);
      for (int k = 0; k < n; ++k) s += (k ? (rng() % 5 ? " " : "\n  ") : "") + words[rng() % words.size()];
      return s;
    };
    CoTTrace t{phrase(), phrase()};
    if (i % 7 == 0) t.think = "  " + t.think + "\n";
    const auto text = render_cot(t);
    const auto back = parse_cot(text);
    if (!(back == t)) o.fail("round trip " + std::to_string(i) + " changed the trace");
    if (render_cot(back) != text) o.fail("re-render " + std::to_string(i) + " differs");
  }

  const std::vector<std::pair<std::string, CotViolation>> bad{
      {"", CotViolation::missing_think},
      {"<answer>yes</answer>", CotViolation::missing_think},
      {"  \n<answer>yes</answer><think>why</think>", CotViolation::missing_think},
      {"<think>why</think>", CotViolation::missing_answer},
      {"<think>why</think>\n\n", CotViolation::missing_answer},
      {"<think>a</think><think>b</think><answer>c</answer>", CotViolation::duplicate_think},
      {"<think>a</think><answer>c</answer><think>b</think>", CotViolation::duplicate_think},
      {"<think>a</think><answer>b</answer><answer>c</answer>", CotViolation::duplicate_answer},
      {"<think>a</think> <answer>b</answer>\n<answer>b</answer>", CotViolation::duplicate_answer},
      {"preamble <think>a</think><answer>b</answer>", CotViolation::interleaved_text},
      {"<think>a</think> so <answer>b</answer>", CotViolation::interleaved_text},
      {"<think>a</think><answer>b</answer> trailing", CotViolation::interleaved_text},
      {"<think>a<answer>b</answer></think><answer>c</answer>", CotViolation::nested_tag},
      {"<think>a</think><answer>b<think>c</answer>", CotViolation::nested_tag},
      {"<think reason='x'>a</think><answer>b</answer>", CotViolation::malformed_tag},
      {"<think>a</think><answer id=1>b</answer>", CotViolation::malformed_tag},
      {"<think>a", CotViolation::unterminated_block},
      {"<think>a</think><answer>b", CotViolation::unterminated_block},
      {"<think>\n\t </think><answer>b</answer>", CotViolation::empty_payload},
      {"<think>a</think><answer></answer>", CotViolation::empty_payload},
  };
  std::size_t n_bad = 0;
  for (const auto& [text, want] : bad) {
    // each malformed trace goes through the corpus reader as a one-line corpus
    std::istringstream corpus(nlohmann::json{{"clip_id", "c"}, {"prompt", "p"}, {"trace", text}}.dump() + "\n");
    const auto rep = read_cot_corpus(corpus);
    if (!rep.records.empty() || rep.issues.size() != 1) o.fail("corpus accepted: " + text);
    try {
      parse_cot(text);
      o.fail("parsed: " + text);
    } catch (const CotParseError& e) {
      if (e.violation() != want)
        o.fail("'" + text + "' gave " + std::string(to_string(e.violation())) + ", want " + std::string(to_string(want)));
      else if (!rep.issues.empty() && rep.issues[0].message.find(std::string(to_string(want))) == std::string::npos)
        o.fail("corpus issue for '" + text + "' does not name " + std::string(to_string(want)));
      else
        ++n_bad;
    }
  }
  o.note("50 round trips, " + std::to_string(n_bad) + "/" + std::to_string(bad.size()) + " malformed rejected correctly");
}

void split(Outcome& o) {
  // unequal class sizes so the ceil is exercised
  DatasetManifest m = test::synthetic_manifest(110, 1);
  m.clips.clear();
  std::map<std::string, std::vector<std::string>> by_class;
  for (std::size_t c = 0; c < m.classes.size(); ++c) {
    const std::size_t n = 3 + c % 25;
    for (std::size_t k = 0; k < n; ++k) {
      ManifestClip clip;
      clip.meta.clip_id = m.classes[c] + "-" + std::to_string(k);
      clip.meta.n_frames = 30;
      clip.meta.width = 640;
      clip.meta.height = 480;
      clip.meta.class_label = m.classes[c];
      by_class[m.classes[c]].push_back(clip.meta.clip_id);
      m.clips.push_back(std::move(clip));
    }
  }
  std::set<std::vector<std::string>> open_sets;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = split_dataset(m, seed);
    if (!(split_dataset(m, seed) == s)) o.fail("seed " + std::to_string(seed) + " is not deterministic");
    if (s.open_set_classes.size() != 11) o.fail(std::to_string(s.open_set_classes.size()) + " open classes");
    std::set<std::string> open(s.open_set_classes.begin(), s.open_set_classes.end());
    if (open.size() != s.open_set_classes.size()) o.fail("repeated open class");
    open_sets.insert(std::vector<std::string>(open.begin(), open.end()));
    if (s.assignments.size() + open.size() != 110) o.fail("classes lost or duplicated");
    for (const auto& [cls, cs] : s.assignments) {
      if (open.count(cls)) o.fail(cls + " is both open and retained");
      const auto& clips = by_class.at(cls);
      const auto want = static_cast<std::size_t>(std::ceil(clips.size() / 10.0));
      if (cs.closed_test.size() != want)
        o.fail(cls + " has " + std::to_string(cs.closed_test.size()) + " test clips, want " + std::to_string(want));
      std::vector<std::string> joined = cs.train;
      joined.insert(joined.end(), cs.closed_test.begin(), cs.closed_test.end());
      std::sort(joined.begin(), joined.end());
      auto expect = clips;
      std::sort(expect.begin(), expect.end());
      if (joined != expect) o.fail(cls + " train/test is not a partition of its clips");
    }
    if (!o.ok) break;
  }
  if (open_sets.size() < 90) o.fail("only " + std::to_string(open_sets.size()) + " distinct open sets over 100 seeds");
  o.note("100 seeds, 11 open classes each, " + std::to_string(open_sets.size()) + " distinct open sets");
}

void serving_e2e(Outcome& o) {
  using namespace gestura::serving;
  ServerConfig cfg;
  cfg.backend = std::make_shared<MockBackend>(MockBackendConfig::field_trial());
  InferenceServer server(cfg);
  server.start();
  const auto req = infer_request_from_json(read_json_file(test::fixture("infer_request.json")));
  const auto rep = bench_latency({{"127.0.0.1", server.port()}}, req, 20, 20);
  server.stop();
  if (rep.n_ok != 20) {
    o.fail(std::to_string(rep.n_errors) + " requests failed" + (rep.errors.empty() ? "" : ": " + rep.errors[0]));
    return;
  }
  if (std::fabs(rep.infer.mean - 1600.0) > 0.05 * 1600.0) o.fail("mean infer " + fmt(rep.infer.mean) + " ms");
  double worst = 0;
  for (const auto& l : rep.samples) worst = std::max(worst, std::fabs(l.comm_ms + l.infer_ms + l.tts_ms - l.total_ms));
  if (worst > 1.0) o.fail("phase sum off by " + fmt(worst) + " ms");
  if (std::fabs(rep.total.mean - 7830.0) > 200.0) o.fail("mean total " + fmt(rep.total.mean) + " ms");
  o.note("mean comm/infer/tts " + fmt(rep.comm.mean, 5) + " / " + fmt(rep.infer.mean, 5) + " / " + fmt(rep.tts.mean, 5) +
         " ms, mean total " + fmt(rep.total.mean / 1000.0, 4) +
         " s, worst sum gap " + fmt(worst, 3) + " ms");
}

}  // namespace

int main() {
  criterion("triplet machinery", triplets);
  criterion("similarity invariance", invariance);
  criterion("token assembly", token_assembly);
  criterion("projector gradient check", gradcheck);
  criterion("freeze contracts and stage-1 convergence", freeze_contracts);
  criterion("learning-rate schedule", lr_schedule);
  criterion("BLEU against naive oracle", bleu_oracle_cases);
  criterion("top-k table reproduction", topk_reproduction);
  criterion("agreement statistics", agreement);
  criterion("bootstrap intervals", bootstrap);
  criterion("reasoning-trace grammar", cot_grammar);
  criterion("open/closed split", split);
  criterion("end-to-end serving with mock backend", serving_e2e);
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << std::endl;
  return failures ? 1 : 0;
}
