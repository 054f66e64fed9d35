#pragma once

// Gesture intent data model: three-dimension annotations, <think>/<answer>
// reasoning traces, annotation prompt templates, manifests and the
// open-set / closed-set split.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gestura/clip.hpp"
#include "gestura/detail/random.hpp"
#include "gestura/error.hpp"
#include "json.hpp"

namespace gestura {

struct QAAnnotation {
  std::string clip_id;
  std::string description;
  std::string meaning;
  std::optional<std::string> intention;
};

struct CoTTrace {
  std::string think;
  std::string answer;

  friend bool operator==(const CoTTrace&, const CoTTrace&) = default;
};

// ---------------------------------------------------------------------------
// Reasoning trace grammar
//
//   ws* "<think>" payload "</think>" ws* "<answer>" payload "</answer>" ws*
//
// Payloads are non-blank and may not contain anything that starts a tag
// ("<think", "</think", "<answer", "</answer"). No attributes, no nesting.

enum class CotViolation {
  missing_think,
  missing_answer,
  duplicate_think,
  duplicate_answer,
  interleaved_text,
  nested_tag,
  malformed_tag,
  unterminated_block,
  empty_payload,
};

constexpr std::string_view to_string(CotViolation v) noexcept {
  switch (v) {
    case CotViolation::missing_think: return "missing_think";
    case CotViolation::missing_answer: return "missing_answer";
    case CotViolation::duplicate_think: return "duplicate_think";
    case CotViolation::duplicate_answer: return "duplicate_answer";
    case CotViolation::interleaved_text: return "interleaved_text";
    case CotViolation::nested_tag: return "nested_tag";
    case CotViolation::malformed_tag: return "malformed_tag";
    case CotViolation::unterminated_block: return "unterminated_block";
    case CotViolation::empty_payload: return "empty_payload";
  }
  return "unknown";
}

class CotParseError : public Error {
 public:
  CotParseError(CotViolation violation, std::size_t offset, const std::string& detail)
      : Error(ErrorKind::parse, std::string(to_string(violation)) + " at byte " +
                                    std::to_string(offset) + ": " + detail),
        violation_(violation),
        offset_(offset) {}

  CotViolation violation() const noexcept { return violation_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  CotViolation violation_;
  std::size_t offset_;
};

namespace detail {

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";
inline constexpr std::array<std::string_view, 4> kTagStarts = {"<think", "</think", "<answer", "</answer"};

inline bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::size_t skip_space(std::string_view s, std::size_t pos) noexcept {
  while (pos < s.size() && is_space(s[pos])) ++pos;
  return pos;
}

inline bool is_blank(std::string_view s) noexcept {
  return std::all_of(s.begin(), s.end(), [](char c) { return is_space(c); });
}

/// Offset of the first tag start inside `s`, or npos.
inline std::size_t find_tag_start(std::string_view s) noexcept {
  std::size_t best = std::string_view::npos;
  for (auto t : kTagStarts) best = std::min(best, s.find(t));
  return best;
}

inline std::string_view parse_block(std::string_view text, std::size_t& pos, std::string_view open,
                                    std::string_view close) {
  const std::size_t start = pos + open.size();
  const std::size_t end = text.find(close, start);
  if (end == std::string_view::npos) {
    throw CotParseError(CotViolation::unterminated_block, pos,
                        "no " + std::string(close) + " after " + std::string(open));
  }
  const auto payload = text.substr(start, end - start);
  if (auto nested = find_tag_start(payload); nested != std::string_view::npos) {
    throw CotParseError(CotViolation::nested_tag, start + nested,
                        "tag inside " + std::string(open) + " block");
  }
  if (is_blank(payload)) {
    throw CotParseError(CotViolation::empty_payload, start, std::string(open) + " block is empty");
  }
  pos = end + close.size();
  return payload;
}

}  // namespace detail

/// Strict parser for a reasoning trace. Errors carry the violation and the
/// byte offset where it was detected.
inline CoTTrace parse_cot(std::string_view text) {
  using namespace detail;
  std::size_t pos = skip_space(text, 0);

  if (text.compare(pos, kThinkOpen.size(), kThinkOpen) != 0) {
    if (pos == text.size()) throw CotParseError(CotViolation::missing_think, pos, "empty input");
    if (text.compare(pos, kAnswerOpen.size(), kAnswerOpen) == 0)
      throw CotParseError(CotViolation::missing_think, pos, "answer block without a preceding think block");
    if (text.compare(pos, 6, "<think") == 0)
      throw CotParseError(CotViolation::malformed_tag, pos, "think tag must be exactly <think>");
    throw CotParseError(CotViolation::interleaved_text, pos, "text before the think block");
  }
  CoTTrace trace;
  trace.think = std::string(parse_block(text, pos, kThinkOpen, kThinkClose));

  pos = skip_space(text, pos);
  if (pos == text.size()) throw CotParseError(CotViolation::missing_answer, pos, "no answer block");
  if (text.compare(pos, kThinkOpen.size(), kThinkOpen) == 0)
    throw CotParseError(CotViolation::duplicate_think, pos, "second think block");
  if (text.compare(pos, kAnswerOpen.size(), kAnswerOpen) != 0) {
    if (text.compare(pos, 7, "<answer") == 0)
      throw CotParseError(CotViolation::malformed_tag, pos, "answer tag must be exactly <answer>");
    throw CotParseError(CotViolation::interleaved_text, pos, "text between think and answer blocks");
  }
  trace.answer = std::string(parse_block(text, pos, kAnswerOpen, kAnswerClose));

  pos = skip_space(text, pos);
  if (pos != text.size()) {
    if (text.compare(pos, kAnswerOpen.size(), kAnswerOpen) == 0)
      throw CotParseError(CotViolation::duplicate_answer, pos, "second answer block");
    if (text.compare(pos, kThinkOpen.size(), kThinkOpen) == 0)
      throw CotParseError(CotViolation::duplicate_think, pos, "think block after the answer");
    throw CotParseError(CotViolation::interleaved_text, pos, "text after the answer block");
  }
  return trace;
}

/// Throws InvalidInput if the trace could not be parsed back.
inline void validate_cot(const CoTTrace& trace) {
  for (auto* field : {&trace.think, &trace.answer}) {
    if (detail::is_blank(*field)) throw InvalidInput("reasoning trace payload is empty");
    if (detail::find_tag_start(*field) != std::string::npos)
      throw InvalidInput("reasoning trace payload contains a tag literal");
  }
}

/// Canonical tagged form: <think>…</think><answer>…</answer>
inline std::string render_cot(const CoTTrace& trace) {
  validate_cot(trace);
  std::string out;
  out.reserve(trace.think.size() + trace.answer.size() + 32);
  out.append(detail::kThinkOpen).append(trace.think).append(detail::kThinkClose);
  out.append(detail::kAnswerOpen).append(trace.answer).append(detail::kAnswerClose);
  return out;
}

// ---------------------------------------------------------------------------
// Annotation prompt templates (caption stage, reasoning stage).

enum class AnnotationStage { caption, cot };

struct AnnotationFields {
  std::optional<std::string> video_data;
  std::optional<std::string> description;
  std::optional<std::string> meaning;
};

inline constexpr std::string_view kCotExampleResponse =
    "<think>Raising the thumb is commonly used in many cultures to indicate positivity or "
    "agreement. Since the gesture matches this form, the intended meaning is approval.</think>\n"
    "<answer>Represents approval or agreement.</answer>";

inline std::string render_annotation_prompt(AnnotationStage stage, const AnnotationFields& fields) {
  std::string out;
  if (stage == AnnotationStage::caption) {
    if (!fields.video_data) throw InvalidInput("caption prompt requires video_data");
    out += "Please caption the following hand gesture video by providing a detailed description of "
           "hands and its potential meaning:\n";
    out += "Gesture Video: " + *fields.video_data + "\n";
    out += "Provide your response only as a Python dictionary string with keys, 'description', and "
           "'meaning'.\n";
    out += "- 'description' should be a clear, concise explanation of the gesture's physical "
           "appearance and common usage.\n";
    out += "- 'meaning' should explain the potential interpretation or cultural significance of the "
           "gesture.\n";
    out += "DO NOT PROVIDE ANY OTHER OUTPUT TEXT OR EXPLANATION. Only provide the Python dictionary "
           "string.\n";
    out += "For example, your response should look like this: {'description': 'Raising the thumb "
           "upward while other fingers are curled.', 'meaning': 'Represents approval or "
           "agreement.'}";
    return out;
  }
  if (!fields.description) throw InvalidInput("reasoning prompt requires description");
  if (!fields.meaning) throw InvalidInput("reasoning prompt requires meaning");
  out += "Given the following gesture description and its intended meaning, please explain the "
         "reasoning process that connects the physical appearance of the gesture to its intended "
         "interpretation.\n";
  out += "- Gesture Description: " + *fields.description + "\n";
  out += "- Intended Meaning: " + *fields.meaning + "\n";
  out += "Write your reasoning enclosed in <think>...</think>, and conclude with the inferred "
         "gesture meaning enclosed in <answer>...</answer>.\n";
  out += "Only output the reasoning and answer in the specified format. DO NOT include any other "
         "text, comments, or explanations.\n";
  out += "For example, your response should look like this:\n";
  out += kCotExampleResponse;
  return out;
}

// ---------------------------------------------------------------------------
// Caption records: exactly {description, meaning}, both non-empty strings.

struct CaptionViolation {
  enum class Kind { not_object, missing_key, empty_value, not_string, unexpected_key };
  Kind kind;
  std::string key;

  std::string message() const {
    switch (kind) {
      case Kind::not_object: return "record is not a dictionary";
      case Kind::missing_key: return "missing '" + key + "'";
      case Kind::empty_value: return "empty '" + key + "'";
      case Kind::not_string: return "'" + key + "' is not a string";
      case Kind::unexpected_key: return "unexpected key '" + key + "'";
    }
    return {};
  }
  friend bool operator==(const CaptionViolation&, const CaptionViolation&) = default;
};

/// Never throws; an empty result means the record is well-formed.
inline std::vector<CaptionViolation> validate_caption_record(const nlohmann::json& record) {
  using K = CaptionViolation::Kind;
  std::vector<CaptionViolation> out;
  if (!record.is_object()) return {{K::not_object, ""}};
  for (const char* key : {"description", "meaning"}) {
    if (!record.contains(key)) {
      out.push_back({K::missing_key, key});
    } else if (!record[key].is_string()) {
      out.push_back({K::not_string, key});
    } else if (detail::is_blank(record[key].get_ref<const std::string&>())) {
      out.push_back({K::empty_value, key});
    }
  }
  for (const auto& [key, _] : record.items()) {
    if (key != "description" && key != "meaning") out.push_back({K::unexpected_key, key});
  }
  return out;
}

namespace detail {

/// Reads a flat Python dict literal of scalars ({'k': 'v', ...}) into JSON.
class PyDictReader {
 public:
  explicit PyDictReader(std::string_view s) : s_(s) {}

  nlohmann::json read() {
    ws();
    expect('{');
    nlohmann::json obj = nlohmann::json::object();
    ws();
    if (peek() == '}') {
      ++pos_;
    } else {
      while (true) {
        ws();
        std::string key = string_literal();
        ws();
        expect(':');
        ws();
        obj[key] = scalar();
        ws();
        if (peek() == ',') {
          ++pos_;
          ws();
          if (peek() == '}') {
            ++pos_;
            break;
          }
          continue;
        }
        expect('}');
        break;
      }
    }
    ws();
    if (pos_ != s_.size()) fail("trailing text after dictionary");
    return obj;
  }

 private:
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  void ws() { pos_ = skip_space(s_, pos_); }
  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("caption", what + " at byte " + std::to_string(pos_));
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string string_literal() {
    const char quote = peek();
    if (quote != '\'' && quote != '"') fail("expected a quoted string");
    ++pos_;
    std::string out;
    while (true) {
      if (pos_ >= s_.size()) fail("unterminated string");
      char c = s_[pos_++];
      if (c == quote) break;
      if (c == '\\') {
        if (pos_ >= s_.size()) fail("dangling escape");
        char e = s_[pos_++];
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          default: out += e;
        }
      } else {
        out += c;
      }
    }
    return out;
  }

  nlohmann::json scalar() {
    const char c = peek();
    if (c == '\'' || c == '"') return string_literal();
    auto word = [&](std::string_view w) { return s_.compare(pos_, w.size(), w) == 0; };
    if (word("True")) { pos_ += 4; return true; }
    if (word("False")) { pos_ += 5; return false; }
    if (word("None")) { pos_ += 4; return nullptr; }
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '-' ||
                                s_[pos_] == '.' || s_[pos_] == 'e' || s_[pos_] == 'E' || s_[pos_] == '+'))
      ++pos_;
    if (start == pos_) fail("expected a value");
    try {
      return nlohmann::json::parse(s_.substr(start, pos_ - start));
    } catch (const nlohmann::json::exception&) {
      fail("bad number");
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Accepts a JSON object or the Python dictionary string the caption prompt
/// asks for. Throws FormatError if it is neither.
inline nlohmann::json parse_caption_text(std::string_view text) {
  try {
    auto j = nlohmann::json::parse(text);
    if (j.is_object()) return j;
  } catch (const nlohmann::json::parse_error&) {
  }
  return detail::PyDictReader(text).read();
}

// ---------------------------------------------------------------------------
// Manifest

struct ManifestClip {
  ClipMeta meta;
  std::optional<QAAnnotation> annotation;
};

struct DatasetManifest {
  std::vector<std::string> classes;
  std::vector<ManifestClip> clips;
  std::map<std::string, std::uint64_t> counts_by_view;  ///< as declared in the file
};

inline std::vector<std::string> manifest_violations(const DatasetManifest& m) {
  std::vector<std::string> out;
  const std::set<std::string> classes(m.classes.begin(), m.classes.end());
  if (classes.size() != m.classes.size()) out.push_back("classes: duplicate class name");
  std::set<std::string> ids;
  std::map<std::string, std::uint64_t> views;
  for (std::size_t i = 0; i < m.clips.size(); ++i) {
    const auto& c = m.clips[i];
    const std::string where = "clips[" + std::to_string(i) + "]";
    if (!ids.insert(c.meta.clip_id).second) out.push_back(where + ".clip_id: duplicate '" + c.meta.clip_id + "'");
    if (!c.meta.class_label) {
      out.push_back(where + ".class_label: missing");
    } else if (!classes.count(*c.meta.class_label)) {
      out.push_back(where + ".class_label: unknown class '" + *c.meta.class_label + "'");
    }
    if (c.annotation) {
      if (detail::is_blank(c.annotation->description)) out.push_back(where + ".annotation.description: empty");
      if (detail::is_blank(c.annotation->meaning)) out.push_back(where + ".annotation.meaning: empty");
    }
    ++views[std::string(to_string(c.meta.view))];
  }
  for (const auto& [view, n] : m.counts_by_view) {
    const auto actual = views.count(view) ? views[view] : 0;
    if (actual != n)
      out.push_back("counts_by_view." + view + ": declared " + std::to_string(n) + ", found " +
                    std::to_string(actual));
  }
  return out;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("", "manifest is not an object");
  DatasetManifest m;
  if (!j.contains("classes") || !j["classes"].is_array()) throw FormatError("classes", "missing or not an array");
  for (std::size_t i = 0; i < j["classes"].size(); ++i) {
    if (!j["classes"][i].is_string()) throw FormatError("classes[" + std::to_string(i) + "]", "not a string");
    m.classes.push_back(j["classes"][i].get<std::string>());
  }
  if (!j.contains("clips") || !j["clips"].is_array()) throw FormatError("clips", "missing or not an array");
  for (std::size_t i = 0; i < j["clips"].size(); ++i) {
    const auto& c = j["clips"][i];
    const std::string where = "clips[" + std::to_string(i) + "]";
    ManifestClip clip{clip_meta_from_json(c, where), std::nullopt};
    if (c.contains("annotation") && !c["annotation"].is_null()) {
      const auto& a = c["annotation"];
      if (!a.is_object() || !a.contains("description") || !a["description"].is_string() ||
          !a.contains("meaning") || !a["meaning"].is_string())
        throw FormatError(where + ".annotation", "needs string description and meaning");
      QAAnnotation qa{clip.meta.clip_id, a["description"].get<std::string>(), a["meaning"].get<std::string>(),
                      std::nullopt};
      if (a.contains("intention") && !a["intention"].is_null()) {
        if (!a["intention"].is_string()) throw FormatError(where + ".annotation.intention", "not a string");
        qa.intention = a["intention"].get<std::string>();
      }
      clip.annotation = std::move(qa);
    }
    m.clips.push_back(std::move(clip));
  }
  if (j.contains("counts_by_view")) {
    if (!j["counts_by_view"].is_object()) throw FormatError("counts_by_view", "not an object");
    for (const auto& [view, n] : j["counts_by_view"].items()) {
      if (!parse_view(view)) throw FormatError("counts_by_view." + view, "unknown view");
      if (!n.is_number_unsigned()) throw FormatError("counts_by_view." + view, "not a count");
      m.counts_by_view[view] = n.get<std::uint64_t>();
    }
  }
  return m;
}

inline nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json clips = nlohmann::json::array();
  for (const auto& c : m.clips) {
    auto j = to_json(c.meta);
    if (c.annotation) {
      j["annotation"] = {{"description", c.annotation->description}, {"meaning", c.annotation->meaning}};
      if (c.annotation->intention) j["annotation"]["intention"] = *c.annotation->intention;
    }
    clips.push_back(std::move(j));
  }
  nlohmann::json out{{"classes", m.classes}, {"clips", std::move(clips)}};
  if (!m.counts_by_view.empty()) out["counts_by_view"] = m.counts_by_view;
  return out;
}

struct ManifestStats {
  std::uint64_t n_samples = 0;
  std::uint64_t n_classes = 0;
  std::uint64_t n_caption_types = 0;  ///< distinct annotation dimensions present
  std::uint64_t egocentric = 0;
  std::uint64_t exocentric = 0;

  friend bool operator==(const ManifestStats&, const ManifestStats&) = default;
};

inline ManifestStats manifest_stats(const DatasetManifest& m) {
  ManifestStats s;
  s.n_samples = m.clips.size();
  s.n_classes = m.classes.size();
  bool has_desc = false, has_meaning = false, has_intent = false;
  for (const auto& c : m.clips) {
    (c.meta.view == View::egocentric ? s.egocentric : s.exocentric) += 1;
    if (c.annotation) {
      has_desc = has_desc || !c.annotation->description.empty();
      has_meaning = has_meaning || !c.annotation->meaning.empty();
      has_intent = has_intent || (c.annotation->intention && !c.annotation->intention->empty());
    }
  }
  s.n_caption_types = std::uint64_t{has_desc} + has_meaning + has_intent;
  return s;
}

// ---------------------------------------------------------------------------
// Split: a fraction of classes is withheld entirely (open set); from every
// other class a fraction of clips goes to the closed test set.

struct ClassSplit {
  std::vector<std::string> train;
  std::vector<std::string> closed_test;
  friend bool operator==(const ClassSplit&, const ClassSplit&) = default;
};

struct SplitAssignment {
  std::uint64_t seed = 0;
  std::vector<std::string> open_set_classes;
  std::map<std::string, ClassSplit> assignments;
  friend bool operator==(const SplitAssignment&, const SplitAssignment&) = default;
};

/// round-half-up, at least 1
inline std::size_t open_set_class_count(std::size_t n_classes, double open_fraction) {
  const auto n = static_cast<std::size_t>(std::floor(open_fraction * n_classes + 0.5 + 1e-9));
  return std::min(n_classes, std::max<std::size_t>(1, n));
}

/// ceil, so every retained class keeps at least one test clip
inline std::size_t closed_test_clip_count(std::size_t n_clips, double closed_fraction) {
  const auto n = static_cast<std::size_t>(std::ceil(closed_fraction * n_clips - 1e-9));
  return std::min(n_clips, n);
}

inline SplitAssignment split_dataset(const DatasetManifest& manifest, std::uint64_t seed,
                                     double open_fraction = 0.10, double closed_test_fraction = 0.10) {
  if (!(open_fraction > 0.0 && open_fraction < 1.0) ||
      !(closed_test_fraction > 0.0 && closed_test_fraction < 1.0))
    throw InvalidInput("split_dataset: fractions must lie in (0, 1)");
  if (manifest.classes.size() < 10) throw InvalidInput("split_dataset: need at least 10 classes");

  std::vector<std::string> classes = manifest.classes;
  std::sort(classes.begin(), classes.end());
  std::map<std::string, std::vector<std::string>> clips_by_class;
  for (const auto& c : classes) clips_by_class[c];
  for (const auto& c : manifest.clips) {
    if (!c.meta.class_label || !clips_by_class.count(*c.meta.class_label))
      throw InvalidInput("split_dataset: clip '" + c.meta.clip_id + "' has no known class");
    clips_by_class[*c.meta.class_label].push_back(c.meta.clip_id);
  }

  detail::Rng rng(seed);
  SplitAssignment out;
  out.seed = seed;
  std::vector<std::string> order = classes;
  rng.shuffle(std::span<std::string>(order));
  const std::size_t n_open = open_set_class_count(classes.size(), open_fraction);
  out.open_set_classes.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_open));
  std::sort(out.open_set_classes.begin(), out.open_set_classes.end());
  const std::set<std::string> open(out.open_set_classes.begin(), out.open_set_classes.end());

  for (auto& [cls, clips] : clips_by_class) {
    if (open.count(cls)) continue;
    if (clips.empty()) throw InvalidInput("split_dataset: retained class '" + cls + "' has no clips");
    std::sort(clips.begin(), clips.end());
    rng.shuffle(std::span<std::string>(clips));
    const std::size_t n_test = closed_test_clip_count(clips.size(), closed_test_fraction);
    ClassSplit s;
    s.closed_test.assign(clips.begin(), clips.begin() + static_cast<std::ptrdiff_t>(n_test));
    s.train.assign(clips.begin() + static_cast<std::ptrdiff_t>(n_test), clips.end());
    std::sort(s.closed_test.begin(), s.closed_test.end());
    std::sort(s.train.begin(), s.train.end());
    out.assignments.emplace(cls, std::move(s));
  }
  return out;
}

inline nlohmann::json to_json(const SplitAssignment& s) {
  nlohmann::json assignments = nlohmann::json::object();
  for (const auto& [cls, split] : s.assignments)
    assignments[cls] = {{"train", split.train}, {"closed_test", split.closed_test}};
  return {{"seed", s.seed}, {"open_set_classes", s.open_set_classes}, {"assignments", std::move(assignments)}};
}

inline SplitAssignment split_from_json(const nlohmann::json& j) {
  try {
    SplitAssignment s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.open_set_classes = j.at("open_set_classes").get<std::vector<std::string>>();
    for (const auto& [cls, split] : j.at("assignments").items())
      s.assignments[cls] = {split.at("train").get<std::vector<std::string>>(),
                            split.at("closed_test").get<std::vector<std::string>>()};
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("split", e.what());
  }
}

// ---------------------------------------------------------------------------
// Reasoning corpus: one JSON record per line, {clip_id, prompt, trace}.

struct CorpusRecord {
  std::string clip_id;
  std::string prompt;
  CoTTrace trace;
};

struct CorpusIssue {
  std::size_t line = 0;  ///< 1-based
  std::string message;
};

struct CorpusReport {
  std::vector<CorpusRecord> records;
  std::vector<CorpusIssue> issues;
};

inline CorpusReport read_cot_corpus(std::istream& in) {
  CorpusReport report;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (detail::is_blank(line)) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.is_object()) throw FormatError("", "record is not an object");
      for (const char* key : {"clip_id", "prompt", "trace"})
        if (!j.contains(key) || !j[key].is_string()) throw FormatError(key, "missing or not a string");
      report.records.push_back({j["clip_id"].get<std::string>(), j["prompt"].get<std::string>(),
                                parse_cot(j["trace"].get<std::string>())});
    } catch (const nlohmann::json::exception& e) {
      report.issues.push_back({n, std::string("malformed JSON: ") + e.what()});
    } catch (const Error& e) {
      report.issues.push_back({n, e.what()});
    }
  }
  return report;
}

}  // namespace gestura
