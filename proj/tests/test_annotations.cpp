#include <gtest/gtest.h>

#include <json.hpp>
#include <random>

#include "modal_attrib/annotations.hpp"
#include "modal_attrib/errors.hpp"
#include "modal_attrib/io.hpp"
#include "test_support.hpp"

using namespace modal_attrib;
using nlohmann::json;

namespace {

// Every text probability under its CamelCase label, humor 95 and
// informational 10 as in the prompt example.
json full_text_record() {
  json j = json::object();
  for (std::size_t i = 0; i < kTextProbabilityFields.size(); ++i) {
    j[display_name(kTextProbabilityFields[i])] = static_cast<double>(i) * 3.5;
  }
  j["Humor"] = 95;
  j["InformationalSupport"] = 10;
  j["InfoDirection"] = "providing";
  j["MentalHealthConditions"] = {"anxiety", "PTSD"};
  j["MentionedProfiles"] = {"@someone"};
  j["Platforms"] = {"Instagram"};
  j["AIStance"] = "neutral";
  j["row_id"] = "v1";
  return j;
}

json full_visual_record(const std::string& id, int frame, double base) {
  json j = json::object();
  j["row_id"] = id;
  j["frame"] = frame;
  j["Description"] = "a person talking to the camera";
  j["RealOrAI"] = "real";
  for (std::size_t i = 0; i < kVisualProbabilityFields.size(); ++i) {
    j[display_name(kVisualProbabilityFields[i])] = base + static_cast<double>(i);
  }
  j.erase(display_name("text_prob"));
  j["Text"] = base;  // the prompt's label for text_prob
  j.erase(display_name("two_shot"));
  j["Two Shot"] = 5;
  j["Hashtags"] = "#mentalhealth";
  j["RelevantObjects"] = {"phone", "mug"};
  return j;
}

}  // namespace

TEST(ParseText, MapsCamelCaseFields) {
  const auto a = parse_text_annotation(full_text_record().dump());
  EXPECT_DOUBLE_EQ(a.probability("humor"), 95.0);
  EXPECT_DOUBLE_EQ(a.probability("informational_support"), 10.0);
  EXPECT_DOUBLE_EQ(a.probability("coping_strategies"), 0.0);
  EXPECT_EQ(a.info_direction, InfoDirection::providing);
  EXPECT_EQ(a.mh_conditions, (std::vector<std::string>{"anxiety", "PTSD"}));
  EXPECT_EQ(a.ai_stance, AiStance::neutral);
  EXPECT_EQ(a.row_id, "v1");
  EXPECT_EQ(a.warnings, 0u);
}

TEST(ParseText, AliasesAndPercentStrings) {
  auto j = full_text_record();
  j.erase("Covid19");
  j["COVID-19"] = "42%";
  j.erase("LlmAi");
  j["Large Language Models or AI Chatbots"] = " 7 % ";
  j.erase("CrimeOrLawEnforcement");
  const auto a = parse_text_annotation(j.dump());
  EXPECT_DOUBLE_EQ(a.probability("covid19"), 42.0);
  EXPECT_DOUBLE_EQ(a.probability("llm_ai"), 7.0);
}

TEST(ParseText, ClampsOutOfRangeWithWarning) {
  auto j = full_text_record();
  j["Humor"] = 150;
  const auto a = parse_text_annotation(j.dump());
  EXPECT_DOUBLE_EQ(a.probability("humor"), 100.0);
  EXPECT_EQ(a.warnings, 1u);
  j["Healthcare"] = -3;
  EXPECT_EQ(parse_text_annotation(j.dump()).warnings, 2u);
}

TEST(ParseText, MissingFieldNamesIt) {
  auto j = full_text_record();
  j.erase("EmotionalSupport");
  try {
    parse_text_annotation(j.dump());
    FAIL() << "expected AnnotationError";
  } catch (const AnnotationError& e) {
    EXPECT_NE(std::string(e.what()).find("EmotionalSupport"), std::string::npos) << e.what();
  }
}

TEST(ParseText, NonJsonIsParseError) {
  EXPECT_THROW(parse_text_annotation("Humor: 95"), ParseError);
  EXPECT_THROW(parse_text_annotation("[1, 2]"), ParseError);
}

TEST(ParseText, BadEnumIsAnnotationError) {
  auto j = full_text_record();
  j["InfoDirection"] = "sideways";
  EXPECT_THROW(parse_text_annotation(j.dump()), AnnotationError);
  j = full_text_record();
  j["Humor"] = "lots";
  EXPECT_THROW(parse_text_annotation(j.dump()), AnnotationError);
}

TEST(ParseText, SerializeParseIdentity) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 100);
  for (int trial = 0; trial < 50; ++trial) {
    TextAnnotation a;
    a.row_id = "r" + std::to_string(trial);
    for (auto& p : a.probabilities) p = u(rng);
    a.info_direction = static_cast<InfoDirection>(trial % 5);
    if (trial % 2) a.ai_stance = static_cast<AiStance>(trial % 4);
    a.mh_conditions = {"depression"};
    a.platforms = {"YouTube", "Reddit"};
    const auto b = parse_text_annotation(to_json(a));
    EXPECT_EQ(a, b);
    EXPECT_EQ(to_json(a), to_json(b));
  }
}

TEST(ParseVisual, FieldsAndExtracted) {
  const auto v = parse_visual_annotation(full_visual_record("v1", 0, 20).dump());
  EXPECT_DOUBLE_EQ(v.probability("text_prob"), 20.0);
  EXPECT_DOUBLE_EQ(v.probability("two_shot"), 5.0);
  EXPECT_DOUBLE_EQ(v.probability("sing"), 20.0 + 14.0);
  EXPECT_EQ(v.real_or_ai, RealOrAi::real);
  EXPECT_EQ(v.extracted.at("hashtags"), (std::vector<std::string>{"#mentalhealth"}));
  EXPECT_EQ(v.extracted.at("relevant_objects"), (std::vector<std::string>{"phone", "mug"}));
  EXPECT_EQ(parse_visual_annotation(to_json(v)), v);
}

TEST(ParseVisual, SegmentsWithoutSplitIsSoftWarning) {
  auto j = full_visual_record("v1", 0, 20);
  j["Split"] = 0;
  j["Segments"] = 3;
  const auto v = parse_visual_annotation(j.dump());
  EXPECT_EQ(v.segments, 3);
  EXPECT_EQ(v.warnings, 1u);
  j["Segments"] = -1;
  EXPECT_THROW(parse_visual_annotation(j.dump()), AnnotationError);
}

TEST(ParseVisual, MissingRealOrAi) {
  auto j = full_visual_record("v1", 0, 20);
  j.erase("RealOrAI");
  EXPECT_THROW(parse_visual_annotation(j.dump()), AnnotationError);
}

TEST(Flatten, TextColumnsNamedWithPrefix) {
  auto j1 = full_text_record();
  auto j2 = full_text_record();
  j2["row_id"] = "v2";
  j2["Humor"] = 5;
  const auto cols = flatten({parse_text_annotation(j1.dump()), parse_text_annotation(j2.dump())}, "caption");
  ASSERT_EQ(cols.columns.size(), kTextProbabilityFields.size());
  EXPECT_EQ(cols.columns[0].name, "caption_coping_strategies");
  bool saw_humor = false;
  for (std::size_t c = 0; c < cols.columns.size(); ++c) {
    EXPECT_EQ(cols.columns[c].modality, Modality::text);
    EXPECT_EQ(cols.columns[c].kind, ColumnKind::probabilistic);
    if (cols.columns[c].name == "caption_humor") {
      saw_humor = true;
      EXPECT_DOUBLE_EQ(cols.values(0, c), 95.0);
      EXPECT_DOUBLE_EQ(cols.values(1, c), 5.0);
    }
  }
  EXPECT_TRUE(saw_humor);
  EXPECT_EQ(cols.row_ids, (std::vector<std::string>{"v1", "v2"}));
  ASSERT_EQ(cols.sidecar.size(), 2u);
  const auto side = json::parse(cols.sidecar[0]);
  EXPECT_EQ(side["caption_info_direction"], "providing");
  EXPECT_EQ(side["caption_platforms"], json({"Instagram"}));
}

TEST(Flatten, OutputSatisfiesTableInvariants) {
  std::vector<TextAnnotation> items;
  for (int i = 0; i < 30; ++i) {
    auto a = mock_annotate("tips lol my anxiety #" + std::to_string(i), 3);
    a.row_id = "r" + std::to_string(i);
    items.push_back(a);
  }
  const auto cols = flatten(items, "transcript");
  Schema schema;
  schema.target = {"views", TargetTransform::none};
  schema.columns = cols.columns;
  EXPECT_NO_THROW(FeatureTable(schema, cols.values, std::vector<double>(items.size(), 1.0), cols.row_ids));
}

TEST(Flatten, DuplicateRowIdRejected) {
  const auto a = parse_text_annotation(full_text_record().dump());
  EXPECT_THROW(flatten({a, a}, "caption"), DuplicateIdError);
}

TEST(Flatten, EmptyListGivesNoColumns) {
  const auto cols = flatten(std::vector<TextAnnotation>{}, "caption");
  EXPECT_TRUE(cols.columns.empty());
  EXPECT_TRUE(cols.row_ids.empty());
  EXPECT_TRUE(flatten(std::vector<VisualAnnotation>{}, "frame").columns.empty());
}

TEST(Flatten, FiveFramesAggregateToOneRow) {
  std::vector<VisualAnnotation> frames;
  for (int f = 0; f < 5; ++f) {
    frames.push_back(parse_visual_annotation(full_visual_record("vid", f, 10.0 * f).dump()));
  }
  frames.push_back(parse_visual_annotation(full_visual_record("other", 0, 50).dump()));
  const auto mean = flatten(frames, "frame");
  ASSERT_EQ(mean.row_ids, (std::vector<std::string>{"vid", "other"}));
  EXPECT_EQ(mean.columns[0].name, "frame_text_prob");
  EXPECT_EQ(mean.columns[0].modality, Modality::visual);
  EXPECT_DOUBLE_EQ(mean.values(0, 0), 20.0);  // mean of 0,10,20,30,40
  EXPECT_DOUBLE_EQ(mean.values(1, 0), 50.0);
  const auto mx = flatten(frames, "frame", FrameAggregation::max);
  EXPECT_DOUBLE_EQ(mx.values(0, 0), 40.0);
  const auto side = json::parse(mean.sidecar[0]);
  EXPECT_EQ(side["frame_frames"].size(), 5u);
}

TEST(Flatten, RepeatedFrameRejected) {
  const auto f = parse_visual_annotation(full_visual_record("vid", 2, 10).dump());
  EXPECT_THROW(flatten({f, f}, "frame"), DuplicateIdError);
}

TEST(MockAnnotator, Deterministic) {
  EXPECT_EQ(mock_annotate("tips for coping with anxiety", 7), mock_annotate("tips for coping with anxiety", 7));
  EXPECT_NE(mock_annotate("tips for coping with anxiety", 7).probabilities,
            mock_annotate("tips for coping with anxiety", 8).probabilities);
}

TEST(MockAnnotator, KeywordRules) {
  const auto tips = mock_annotate("tips for coping with anxiety", 7);
  EXPECT_GE(tips.probability("informational_support"), 70.0);
  EXPECT_GE(tips.probability("coping_strategies"), 70.0);
  EXPECT_EQ(tips.mh_conditions, (std::vector<std::string>{"anxiety"}));
  EXPECT_EQ(tips.info_direction, InfoDirection::providing);

  const double plain = mock_annotate("a quiet walk", 1).probability("humor");
  const double funny = mock_annotate("a quiet walk lol", 1).probability("humor");
  EXPECT_GT(funny, plain);
  EXPECT_GE(funny, 70.0);

  const auto q = mock_annotate("does anyone know a good therapist? @helper on instagram", 2);
  EXPECT_EQ(q.info_direction, InfoDirection::seeking);
  EXPECT_EQ(q.mentioned_profiles, (std::vector<std::string>{"@helper"}));
  EXPECT_EQ(q.platforms, (std::vector<std::string>{"instagram"}));
}

TEST(MockAnnotator, EmptyText) {
  const auto a = mock_annotate("", 5);
  for (double p : a.probabilities) EXPECT_EQ(p, 0.0);
  EXPECT_EQ(a.info_direction, InfoDirection::unclear);
  EXPECT_FALSE(a.ai_stance.has_value());
}

TEST(MockAnnotator, InvariantsHoldOnRandomText) {
  std::mt19937_64 rng(4);
  const std::vector<std::string> words = {"tips", "lol", "my", "covid", "chatgpt", "love", "?", "exam",
                                          "therapy", "donate", "the", "and", "@x", "hate"};
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    for (int k = 0; k < 8; ++k) text += words[rng() % words.size()] + " ";
    const auto a = mock_annotate(text, trial);
    for (double p : a.probabilities) {
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 100.0);
    }
    EXPECT_EQ(parse_text_annotation(to_json(a)), a);
  }
}

namespace {

AgreementReport fixture_agreement(const std::string& modality) {
  const auto dir = test_support::fixture("agreement");
  return agreement(parse_machine_labels(io::read_file(dir / (modality + "_machine.jsonl"))),
                   parse_human_labels(io::read_file(dir / (modality + "_human.csv"))), 50.0);
}

}  // namespace

TEST(Agreement, CaptionFixtureReproducesTable) {
  const auto r = fixture_agreement("caption");
  EXPECT_EQ(r.n, 20u);
  EXPECT_EQ(r.n_judgments, 200u);
  EXPECT_DOUBLE_EQ(r.overall, 90.0);
  EXPECT_DOUBLE_EQ(r.mean_of_categories, 90.0);
  EXPECT_DOUBLE_EQ(r.per_category.at("situational_stressors").accuracy, 65.0);
  EXPECT_EQ(r.per_category.at("situational_stressors").matches, 13u);
  EXPECT_DOUBLE_EQ(r.per_category.at("healthcare").accuracy, 100.0);
  EXPECT_DOUBLE_EQ(r.per_category.at("appraisal_support").accuracy, 75.0);
}

TEST(Agreement, TranscriptAndImageOverall) {
  const auto t = fixture_agreement("transcript");
  EXPECT_DOUBLE_EQ(t.overall, 86.5);
  EXPECT_DOUBLE_EQ(t.per_category.at("self_disclosure").accuracy, 100.0);
  EXPECT_DOUBLE_EQ(t.per_category.at("communication").accuracy, 75.0);
  const auto i = fixture_agreement("image");
  EXPECT_DOUBLE_EQ(i.overall, 83.5);
  EXPECT_DOUBLE_EQ(i.per_category.at("ai").accuracy, 60.0);
  EXPECT_DOUBLE_EQ(i.per_category.at("text").accuracy, 85.0);
}

TEST(Agreement, IdentityIsPerfect) {
  std::vector<MachineLabels> m;
  std::vector<HumanLabels> h;
  for (int i = 0; i < 10; ++i) {
    m.push_back({"r" + std::to_string(i), {{"humor", i % 2 ? 100.0 : 0.0}, {"political", i % 3 ? 80.0 : 10.0}}});
    h.push_back({"r" + std::to_string(i), {{"humor", i % 2}, {"political", i % 3 ? 1 : 0}}});
  }
  const auto r = agreement(m, h);
  EXPECT_DOUBLE_EQ(r.overall, 100.0);
  for (const auto& [cat, c] : r.per_category) EXPECT_DOUBLE_EQ(c.accuracy, 100.0) << cat;
}

TEST(Agreement, ThresholdBoundaryCountsPositive) {
  const auto r = agreement({{"a", {{"x", 50.0}}}}, {{"a", {{"x", 1}}}}, 50.0);
  EXPECT_DOUBLE_EQ(r.overall, 100.0);
}

TEST(Agreement, SymmetricWhenMachineIsBinary) {
  std::mt19937_64 rng(2);
  std::vector<MachineLabels> m;
  std::vector<HumanLabels> h;
  for (int i = 0; i < 40; ++i) {
    MachineLabels ml{"r" + std::to_string(i), {}};
    HumanLabels hl{"r" + std::to_string(i), {}};
    for (const char* cat : {"a", "b", "c"}) {
      ml.probabilities[cat] = (rng() % 2) ? 100.0 : 0.0;
      hl.labels[cat] = static_cast<int>(rng() % 2);
    }
    m.push_back(ml);
    h.push_back(hl);
  }
  std::vector<MachineLabels> m2;
  std::vector<HumanLabels> h2;
  for (std::size_t i = 0; i < m.size(); ++i) {
    MachineLabels ml{h[i].row_id, {}};
    HumanLabels hl{m[i].row_id, {}};
    for (const auto& [cat, v] : h[i].labels) ml.probabilities[cat] = v * 100.0;
    for (const auto& [cat, v] : m[i].probabilities) hl.labels[cat] = v >= 50.0 ? 1 : 0;
    m2.push_back(ml);
    h2.push_back(hl);
  }
  const auto a = agreement(m, h), b = agreement(m2, h2);
  EXPECT_DOUBLE_EQ(a.overall, b.overall);
  for (const auto& [cat, c] : a.per_category) EXPECT_EQ(c.matches, b.per_category.at(cat).matches);
}

TEST(Agreement, JoinErrors) {
  EXPECT_THROW(agreement({{"a", {{"x", 60.0}}}}, {{"b", {{"x", 1}}}}), JoinError);
  EXPECT_THROW(agreement({{"a", {{"x", 60.0}}}}, {}), JoinError);
  EXPECT_THROW(agreement({{"a", {{"x", 60.0}}}}, {{"a", {{"y", 1}}}}), JoinError);
  EXPECT_THROW(agreement({{"a", {{"x", 60.0}}}}, {{"a", {{"x", 1}}}}, 0.0), ConfigError);
}

TEST(Agreement, MacroDiffersFromPooledWhenUnbalanced) {
  // category x: 1 of 1 correct; category y: 1 of 3 correct
  std::vector<MachineLabels> m = {{"a", {{"x", 90.0}, {"y", 90.0}}}, {"b", {{"y", 90.0}}}, {"c", {{"y", 90.0}}}};
  std::vector<HumanLabels> h = {{"a", {{"x", 1}, {"y", 1}}}, {"b", {{"y", 0}}}, {"c", {{"y", 0}}}};
  const auto r = agreement(m, h);
  EXPECT_DOUBLE_EQ(r.overall, 50.0);
  EXPECT_NEAR(r.mean_of_categories, (100.0 + 100.0 / 3.0) / 2.0, 1e-12);
}

TEST(Agreement, CanonicalCategories) {
  EXPECT_EQ(canonical_category("Situational Stressors"), "situational_stressors");
  EXPECT_EQ(canonical_category("SituationalStressors"), "situational_stressors");
  EXPECT_EQ(canonical_category("Self-Disclosure Narrative"), "self_disclosure");
  EXPECT_EQ(canonical_category("Political Issues"), "political");
  EXPECT_EQ(canonical_category("Full Shot"), "full_shot");
  EXPECT_EQ(canonical_category("Text"), "text");
  EXPECT_EQ(canonical_category("Some New Thing!"), "some_new_thing");
}
