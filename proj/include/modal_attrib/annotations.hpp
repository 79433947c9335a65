#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "modal_attrib/matrix.hpp"
#include "modal_attrib/table.hpp"

namespace modal_attrib {

// Canonical snake_case names of the probability fields. Incoming keys are
// matched case- and punctuation-insensitively against these names and the
// alias table in annotations.cpp ("InformationalSupport", "COVID-19",
// "Two Shot", ...).
constexpr std::array<std::string_view, 24> kTextProbabilityFields{
    "coping_strategies",     "communication",        "interpersonal_relationships",
    "self_growth",           "situational_stressors", "humor",
    "emotional_support",     "instrumental_support", "informational_support",
    "appraisal_support",     "political",            "healthcare",
    "foreign_affairs",       "economic",             "climate",
    "covid19",               "immigration",          "crime",
    "technology",            "llm_ai",               "advocacy",
    "awareness",             "call_to_action",       "self_disclosure"};

constexpr std::array<std::string_view, 15> kVisualProbabilityFields{
    "text_prob", "special_effects", "close_up", "full_shot", "two_shot",
    "pov",       "wide",            "split",    "selfie",    "homemade",
    "professional", "meme",         "illustration", "dance", "sing"};

constexpr std::array<std::string_view, 11> kVisualExtractedFields{
    "text_content", "language", "hashtags",          "location",    "date",       "link",
    "music",        "relevant_objects", "known_individuals", "meme_source", "orientation"};

enum class InfoDirection { seeking, providing, both, neither, unclear };
enum class AiStance { positive, neutral, negative, unclear };
enum class RealOrAi { real, ai };
enum class FrameAggregation { mean, max };

std::string_view to_string(InfoDirection d);
std::string_view to_string(AiStance s);
std::string_view to_string(RealOrAi r);
std::string_view to_string(FrameAggregation a);
FrameAggregation parse_frame_aggregation(std::string_view s);

// Display name of a canonical field: "emotional_support" -> "EmotionalSupport".
std::string display_name(std::string_view canonical);

struct TextAnnotation {
  std::string row_id;
  std::array<double, kTextProbabilityFields.size()> probabilities{};
  InfoDirection info_direction = InfoDirection::unclear;
  std::vector<std::string> mh_conditions;
  std::vector<std::string> mentioned_profiles;
  std::vector<std::string> platforms;
  std::optional<AiStance> ai_stance;
  std::size_t warnings = 0;  // clamped probabilities

  double probability(std::string_view field) const;
  bool operator==(const TextAnnotation& other) const;
};

struct VisualAnnotation {
  std::string row_id;
  int frame = 0;
  std::string description;
  RealOrAi real_or_ai = RealOrAi::real;
  std::array<double, kVisualProbabilityFields.size()> probabilities{};
  std::optional<int> segments;
  std::map<std::string, std::vector<std::string>> extracted;  // kVisualExtractedFields keys
  std::size_t warnings = 0;  // clamped probabilities plus soft segment checks

  double probability(std::string_view field) const;
  bool operator==(const VisualAnnotation& other) const;
};

// ParseError on invalid JSON; AnnotationError naming the missing or malformed
// field. Out-of-range probabilities are clamped to [0, 100] and counted.
TextAnnotation parse_text_annotation(std::string_view json_text);
VisualAnnotation parse_visual_annotation(std::string_view json_text);

std::string to_json(const TextAnnotation& a);
std::string to_json(const VisualAnnotation& a);

std::vector<TextAnnotation> read_text_annotations(const std::filesystem::path& jsonl);
std::vector<VisualAnnotation> read_visual_annotations(const std::filesystem::path& jsonl);

// Probabilistic feature columns produced from annotations, plus a JSONL
// sidecar carrying the enum and list fields.
struct AnnotationColumns {
  std::vector<ColumnSpec> columns;
  Matrix values;
  std::vector<std::string> row_ids;
  std::vector<std::string> sidecar;  // one JSON object per row

  std::string to_csv() const;
  std::string schema_fragment_json() const;
};

// One column `<prefix>_<field>` per probability field, modality text.
// DuplicateIdError on a repeated row_id.
AnnotationColumns flatten(const std::vector<TextAnnotation>& annotations, std::string_view prefix);
// Frames sharing a row_id are aggregated to one row per video; a repeated
// (row_id, frame) pair is a DuplicateIdError.
AnnotationColumns flatten(const std::vector<VisualAnnotation>& annotations, std::string_view prefix,
                          FrameAggregation aggregation = FrameAggregation::mean);

// Source of zero-shot annotations. The mock is the only shipped implementation.
class Annotator {
 public:
  virtual ~Annotator() = default;
  virtual TextAnnotation annotate(std::string_view text) const = 0;
};

// Deterministic keyword-driven annotator for tests and dry runs.
class MockAnnotator final : public Annotator {
 public:
  explicit MockAnnotator(std::uint64_t seed) : seed_(seed) {}
  TextAnnotation annotate(std::string_view text) const override;

 private:
  std::uint64_t seed_;
};

TextAnnotation mock_annotate(std::string_view text, std::uint64_t seed);

// Machine probabilities and human binary labels keyed by canonical category.
struct MachineLabels {
  std::string row_id;
  std::map<std::string, double> probabilities;
};

struct HumanLabels {
  std::string row_id;
  std::map<std::string, int> labels;  // 0 or 1
};

struct CategoryAgreement {
  std::size_t matches = 0;
  std::size_t total = 0;
  double accuracy = 0.0;  // percent
};

struct AgreementReport {
  std::map<std::string, CategoryAgreement> per_category;
  double overall = 0.0;           // pooled over every (item, category) judgment
  double mean_of_categories = 0.0;
  std::size_t n = 0;              // items
  std::size_t n_judgments = 0;
  double threshold = 50.0;
};

// Machine probability >= threshold counts as positive. JoinError on unequal
// lengths, unmatched row_ids, or a human category absent from the machine row.
AgreementReport agreement(const std::vector<MachineLabels>& machine,
                          const std::vector<HumanLabels>& human, double threshold = 50.0);

// Canonical category key: alias-table match, else lowercase with runs of
// non-alphanumerics collapsed to '_'.
std::string canonical_category(std::string_view key);

std::vector<MachineLabels> parse_machine_labels(std::string_view jsonl);
std::vector<HumanLabels> parse_human_labels(std::string_view csv);
std::string agreement_to_json(const AgreementReport& report);

}  // namespace modal_attrib
