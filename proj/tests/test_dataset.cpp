#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "gestura/dataset.hpp"
#include "gestura/landmark_io.hpp"
#include "support.hpp"

using namespace gestura;

namespace {

void expect_violation(std::string_view text, CotViolation v, std::size_t offset) {
  try {
    parse_cot(text);
    FAIL() << "parsed: " << text;
  } catch (const CotParseError& e) {
    EXPECT_EQ(e.violation(), v) << text;
    EXPECT_EQ(e.offset(), offset) << text;
    EXPECT_EQ(e.kind(), ErrorKind::parse);
  }
}

}  // namespace

TEST(Cot, ParsesExampleResponse) {
  const auto t = parse_cot(
      "<think>Raising the thumb is commonly used to show approval.</think><answer>Represents approval or "
      "agreement.</answer>");
  EXPECT_EQ(t.think, "Raising the thumb is commonly used to show approval.");
  EXPECT_EQ(t.answer, "Represents approval or agreement.");
}

TEST(Cot, WhitespaceBetweenBlocksIsAllowed) {
  const auto t = parse_cot("  <think>a</think>\n\n<answer>b</answer>\n");
  EXPECT_EQ(t.think, "a");
  EXPECT_EQ(t.answer, "b");
}

TEST(Cot, Violations) {
  expect_violation("<answer>x</answer>", CotViolation::missing_think, 0);
  expect_violation("", CotViolation::missing_think, 0);
  expect_violation("<think>a</think>extra<answer>b</answer>", CotViolation::interleaved_text, 16);
  expect_violation("<think>a</think>", CotViolation::missing_answer, 16);
  expect_violation("<think>a</think><think>b</think><answer>c</answer>", CotViolation::duplicate_think, 16);
  expect_violation("<think>a</think><answer>b</answer><answer>c</answer>", CotViolation::duplicate_answer, 34);
  expect_violation("<think>a<think>b</think></think><answer>c</answer>", CotViolation::nested_tag, 8);
  expect_violation("hello<think>a</think><answer>b</answer>", CotViolation::interleaved_text, 0);
  expect_violation("<think>a</think><answer>b</answer>bye", CotViolation::interleaved_text, 34);
  expect_violation("<think >a</think><answer>b</answer>", CotViolation::malformed_tag, 0);
  expect_violation("<think>a", CotViolation::unterminated_block, 0);
  expect_violation("<think>  </think><answer>b</answer>", CotViolation::empty_payload, 7);
}

TEST(Cot, RenderRoundTrip) {
  const CoTTrace t{"The index finger points up & taps twice.", "Take a photo."};
  const auto s = render_cot(t);
  EXPECT_EQ(s, "<think>The index finger points up & taps twice.</think><answer>Take a photo.</answer>");
  EXPECT_EQ(parse_cot(s), t);
  EXPECT_THROW(render_cot({"has <answer> inside", "x"}), InvalidInput);
  EXPECT_THROW(render_cot({"", "x"}), InvalidInput);
}

TEST(AnnotationPrompt, CotStage) {
  AnnotationFields f;
  f.description = "Raising the thumb upward while other fingers are curled.";
  f.meaning = "Represents approval.";
  const auto p = render_annotation_prompt(AnnotationStage::cot, f);
  EXPECT_NE(p.find("- Gesture Description: Raising the thumb upward while other fingers are curled.\n"),
            std::string::npos);
  EXPECT_NE(p.find("- Intended Meaning: Represents approval.\n"), std::string::npos);
  EXPECT_NE(p.find("<think>...</think>"), std::string::npos);
  EXPECT_EQ(p, render_annotation_prompt(AnnotationStage::cot, f));
  f.meaning.reset();
  EXPECT_THROW(render_annotation_prompt(AnnotationStage::cot, f), InvalidInput);
}

TEST(AnnotationPrompt, CaptionStage) {
  AnnotationFields f;
  f.video_data = "clip-17.mp4";
  const auto p = render_annotation_prompt(AnnotationStage::caption, f);
  EXPECT_NE(p.find("- 'description' should"), std::string::npos);
  EXPECT_NE(p.find("- 'meaning' should"), std::string::npos);
  EXPECT_NE(p.find("Gesture Video: clip-17.mp4"), std::string::npos);
  EXPECT_THROW(render_annotation_prompt(AnnotationStage::caption, {}), InvalidInput);
}

TEST(Caption, Validation) {
  using K = CaptionViolation::Kind;
  EXPECT_TRUE(validate_caption_record({{"description", "Raising the thumb upward."},
                                       {"meaning", "Represents approval or agreement."}})
                  .empty());
  const auto v = validate_caption_record({{"description", ""}});
  EXPECT_EQ(v, (std::vector<CaptionViolation>{{K::empty_value, "description"}, {K::missing_key, "meaning"}}));
  const auto extra = validate_caption_record({{"description", "a"}, {"meaning", "b"}, {"mood", "c"}});
  EXPECT_EQ(extra, (std::vector<CaptionViolation>{{K::unexpected_key, "mood"}}));
  EXPECT_EQ(validate_caption_record(nlohmann::json::array()).front().kind, K::not_object);
  EXPECT_EQ(validate_caption_record({{"description", 3}, {"meaning", "b"}}).front().kind, K::not_string);
}

TEST(Caption, PythonDictLiterals) {
  const auto j = parse_caption_text(
      "{'description': 'Raising the thumb upward while other fingers are curled.', 'meaning': "
      "\"It's approval.\"}");
  EXPECT_EQ(j["description"], "Raising the thumb upward while other fingers are curled.");
  EXPECT_EQ(j["meaning"], "It's approval.");
  EXPECT_EQ(parse_caption_text("{'a': 'it\\'s', 'n': 3, 'ok': True, 'z': None}"),
            (nlohmann::json{{"a", "it's"}, {"n", 3}, {"ok", true}, {"z", nullptr}}));
  EXPECT_THROW(parse_caption_text("{'a': 'unterminated}"), FormatError);
  EXPECT_THROW(parse_caption_text("not a dict"), FormatError);
  EXPECT_THROW(parse_caption_text("{'a': 1} trailing"), FormatError);
}

TEST(Caption, FixtureFile) {
  std::ifstream in(test::fixture("captions.txt"));
  std::string line;
  std::vector<std::size_t> counts;
  while (std::getline(in, line)) counts.push_back(validate_caption_record(parse_caption_text(line)).size());
  EXPECT_EQ(counts, (std::vector<std::size_t>{0, 0, 2}));
}

TEST(Manifest, FixtureStats) {
  const auto m = manifest_from_json(read_json_file(test::fixture("dataset_manifest.json")));
  EXPECT_TRUE(manifest_violations(m).empty());
  const auto s = manifest_stats(m);
  EXPECT_EQ(s.n_samples, 36u);
  EXPECT_EQ(s.n_classes, 12u);
  EXPECT_EQ(s.egocentric + s.exocentric, 36u);
  const auto again = manifest_from_json(to_json(m));
  EXPECT_EQ(manifest_stats(again), s);
}

TEST(Manifest, SyntheticStats) {
  auto m = test::synthetic_manifest(3, 4);
  for (std::size_t i = 0; i < m.clips.size(); ++i)
    m.clips[i].annotation = QAAnnotation{m.clips[i].meta.clip_id, "d", "m", std::string("i")};
  const auto s = manifest_stats(m);
  EXPECT_EQ(s.n_samples, 12u);
  EXPECT_EQ(s.n_classes, 3u);
  EXPECT_EQ(s.n_caption_types, 3u);
  EXPECT_EQ(s.egocentric, 6u);
  EXPECT_EQ(manifest_stats({}), ManifestStats{});
}

TEST(Manifest, Violations) {
  auto m = test::synthetic_manifest(2, 2);
  m.clips[1].meta.clip_id = m.clips[0].meta.clip_id;
  m.clips[2].meta.class_label = "nope";
  m.counts_by_view["egocentric"] = 5;
  const auto v = manifest_violations(m);
  EXPECT_EQ(v.size(), 3u);
  nlohmann::json bad = {{"classes", {"a"}}, {"clips", {{{"clip_id", "x"}, {"n_frames", -1}}}}};
  EXPECT_THROW(manifest_from_json(bad), FormatError);
}

TEST(Split, CountsAndPartition) {
  const auto m = test::synthetic_manifest(110, 20);
  const auto s = split_dataset(m, 7);
  EXPECT_EQ(s.open_set_classes.size(), 11u);
  EXPECT_EQ(s.assignments.size(), 99u);
  std::set<std::string> seen;
  for (const auto& [cls, split] : s.assignments) {
    EXPECT_EQ(split.closed_test.size(), 2u);
    EXPECT_EQ(split.train.size(), 18u);
    for (const auto& c : split.train) EXPECT_TRUE(seen.insert(c).second);
    for (const auto& c : split.closed_test) EXPECT_TRUE(seen.insert(c).second);
  }
  for (const auto& open : s.open_set_classes) EXPECT_EQ(s.assignments.count(open), 0u);
  EXPECT_EQ(seen.size(), 99u * 20u);
}

TEST(Split, RoundingRules) {
  EXPECT_EQ(closed_test_clip_count(20, 0.1), 2u);
  EXPECT_EQ(closed_test_clip_count(21, 0.1), 3u);
  EXPECT_EQ(closed_test_clip_count(1, 0.1), 1u);
  EXPECT_EQ(open_set_class_count(110, 0.1), 11u);
  EXPECT_EQ(open_set_class_count(12, 0.1), 1u);
  EXPECT_EQ(open_set_class_count(15, 0.1), 2u);
}

TEST(Split, DeterministicAndSeedSensitive) {
  const auto m = test::synthetic_manifest(30, 5);
  EXPECT_EQ(split_dataset(m, 1), split_dataset(m, 1));
  EXPECT_NE(split_dataset(m, 1).open_set_classes, split_dataset(m, 2).open_set_classes);
  const auto s = split_dataset(m, 9);
  EXPECT_EQ(split_from_json(to_json(s)), s);
}

TEST(Split, Errors) {
  EXPECT_THROW(split_dataset(test::synthetic_manifest(9, 3), 1), InvalidInput);
  EXPECT_THROW(split_dataset(test::synthetic_manifest(10, 3), 1, 0.0), InvalidInput);
  auto m = test::synthetic_manifest(10, 3);
  m.clips[0].meta.class_label.reset();
  EXPECT_THROW(split_dataset(m, 1), InvalidInput);
}

TEST(Corpus, FixtureReportsBadLine) {
  std::ifstream in(test::fixture("cot_corpus.jsonl"));
  const auto r = read_cot_corpus(in);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].clip_id, "c1");
  ASSERT_EQ(r.issues.size(), 1u);
  EXPECT_EQ(r.issues[0].line, 2u);
  EXPECT_NE(r.issues[0].message.find("interleaved"), std::string::npos);
}
