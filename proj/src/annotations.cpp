#include "modal_attrib/annotations.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "modal_attrib/errors.hpp"
#include "modal_attrib/io.hpp"

namespace modal_attrib {

using nlohmann::json;

namespace {

// Lowercase, alphanumerics only: "Two Shot" -> "twoshot", "COVID-19" -> "covid19".
std::string squash(std::string_view key) {
  std::string out;
  for (char ch : key) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

using AliasTable = std::unordered_map<std::string, std::string>;

void add_canonical(AliasTable& t, std::string_view canonical) {
  t.emplace(squash(canonical), std::string(canonical));
}

void add_aliases(AliasTable& t, std::string_view canonical,
                 std::initializer_list<std::string_view> aliases) {
  for (auto a : aliases) t.emplace(squash(a), std::string(canonical));
}

// Keys shared by both prompt contracts plus the text-side aliases. The
// prompt text names categories in prose; these are the spellings we accept.
const AliasTable& text_aliases() {
  static const AliasTable table = [] {
    AliasTable t;
    for (auto f : kTextProbabilityFields) add_canonical(t, f);
    add_aliases(t, "coping_strategies", {"coping", "CopingStrategy"});
    add_aliases(t, "communication",
                {"CommunicationInSocialInteractions", "SocialCommunication", "CommunicationProbability"});
    add_aliases(t, "interpersonal_relationships", {"Interpersonal", "Relationships"});
    add_aliases(t, "situational_stressors", {"Stressors", "SituationalStressor"});
    add_aliases(t, "humor", {"Humour", "UseOfHumor"});
    add_aliases(t, "emotional_support", {"Emotional"});
    add_aliases(t, "instrumental_support", {"Instrumental"});
    add_aliases(t, "informational_support", {"Informational"});
    add_aliases(t, "appraisal_support", {"Appraisal"});
    add_aliases(t, "political", {"Politics", "PoliticalIssues"});
    add_aliases(t, "healthcare", {"Health", "HealthcareIssues"});
    add_aliases(t, "foreign_affairs", {"ForeignPolicy"});
    add_aliases(t, "economic", {"Economy", "EconomicIssues", "Economics"});
    add_aliases(t, "climate", {"ClimateIssues", "ClimateChange"});
    add_aliases(t, "covid19", {"COVID", "Covid-19", "Coronavirus"});
    add_aliases(t, "crime", {"CrimeOrLawEnforcement", "LawEnforcement", "CrimeLawEnforcement"});
    add_aliases(t, "technology", {"Tech"});
    add_aliases(t, "llm_ai", {"LLM", "LLMs", "AIChatbots", "LargeLanguageModels",
                              "LargeLanguageModelsOrAIChatbots", "LLMOrAI"});
    add_aliases(t, "awareness", {"RaiseAwareness", "RaisingAwareness"});
    add_aliases(t, "call_to_action", {"CTA"});
    add_aliases(t, "self_disclosure", {"SelfDisclosureNarrative", "PersonalNarrative"});
    return t;
  }();
  return table;
}

const AliasTable& text_other_aliases() {
  static const AliasTable table = [] {
    AliasTable t;
    for (auto f : {"row_id", "info_direction", "mh_conditions", "mentioned_profiles", "platforms",
                   "ai_stance"}) {
      add_canonical(t, f);
    }
    add_aliases(t, "row_id", {"id", "video_id"});
    add_aliases(t, "info_direction",
                {"InformationDirection", "InfoSeeking", "SeekingOrProviding", "Direction"});
    add_aliases(t, "mh_conditions", {"MentalHealthConditions", "Conditions"});
    add_aliases(t, "mentioned_profiles", {"Profiles", "Usernames", "SocialMediaProfiles"});
    add_aliases(t, "platforms", {"OtherPlatforms", "SocialMediaPlatforms"});
    add_aliases(t, "ai_stance", {"LLMStance", "AIStance", "Stance"});
    return t;
  }();
  return table;
}

const AliasTable& visual_aliases() {
  static const AliasTable table = [] {
    AliasTable t;
    for (auto f : kVisualProbabilityFields) add_canonical(t, f);
    for (auto f : kVisualExtractedFields) add_canonical(t, f);
    for (auto f : {"row_id", "frame", "description", "real_or_ai", "segments"}) add_canonical(t, f);
    add_aliases(t, "row_id", {"id", "video_id"});
    add_aliases(t, "frame", {"frame_index", "frame_id"});
    add_aliases(t, "real_or_ai", {"RealOrAIGenerated", "Real", "Type", "ImageType"});
    add_aliases(t, "text_prob", {"Text", "ContainsText"});
    add_aliases(t, "special_effects", {"Effects"});
    add_aliases(t, "close_up", {"CloseUp"});
    add_aliases(t, "two_shot", {"TwoShot"});
    add_aliases(t, "pov", {"PointOfView"});
    add_aliases(t, "illustration", {"Drawing", "DrawingIllustration"});
    add_aliases(t, "dance", {"Dancing"});
    add_aliases(t, "sing", {"Singing"});
    add_aliases(t, "text_content", {"ExtractedText"});
    add_aliases(t, "language", {"Languages"});
    return t;
  }();
  return table;
}

// Categories as they appear in validation files, mapped onto annotation
// fields where one exists. "Text" stays "text" here: in validation sheets it
// is a category name, not the visual text_prob key.
const AliasTable& category_aliases() {
  static const AliasTable table = [] {
    AliasTable t = text_aliases();
    for (auto f : kVisualProbabilityFields) add_canonical(t, f);
    add_aliases(t, "special_effects", {"Effects"});
    add_aliases(t, "close_up", {"CloseUp"});
    add_aliases(t, "two_shot", {"TwoShot"});
    add_aliases(t, "pov", {"PointOfView"});
    add_aliases(t, "ai", {"AIGenerated", "AI-generated content"});
    return t;
  }();
  return table;
}

std::optional<std::string> lookup(const AliasTable& table, std::string_view key) {
  auto it = table.find(squash(key));
  if (it == table.end()) return std::nullopt;
  return it->second;
}

json parse_object(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("annotation is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("annotation must be a JSON object");
  return doc;
}

// Numbers, or strings like "95", "95%", " 12.5 % ".
std::optional<double> as_percent(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (!v.is_string()) return std::nullopt;
  std::string s = v.get<std::string>();
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (!s.empty() && s.back() == '%') s.pop_back();
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return io::parse_double(s);
}

double read_probability(const json& v, std::string_view field, std::size_t& warnings) {
  auto p = as_percent(v);
  if (!p || std::isnan(*p)) {
    throw AnnotationError("field " + display_name(field) + " is not a probability: " + v.dump());
  }
  if (*p < 0.0 || *p > 100.0) {
    ++warnings;
    return std::clamp(*p, 0.0, 100.0);
  }
  return *p;
}

std::string read_string(const json& v, std::string_view field) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw AnnotationError("field " + display_name(field) + " must be a string");
}

// Lists arrive as arrays, single strings, or null.
std::vector<std::string> read_list(const json& v, std::string_view field) {
  std::vector<std::string> out;
  if (v.is_null()) return out;
  if (v.is_array()) {
    for (const auto& e : v) {
      if (e.is_null()) continue;
      out.push_back(read_string(e, field));
    }
    return out;
  }
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (!s.empty()) out.push_back(s);
    return out;
  }
  throw AnnotationError("field " + display_name(field) + " must be a list of strings");
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

InfoDirection parse_info_direction(const json& v) {
  const auto s = squash(read_string(v, "info_direction"));
  if (s == "seeking") return InfoDirection::seeking;
  if (s == "providing") return InfoDirection::providing;
  if (s == "both") return InfoDirection::both;
  if (s == "neither") return InfoDirection::neither;
  if (s == "unclear") return InfoDirection::unclear;
  throw AnnotationError("field InfoDirection has unknown value " + v.dump());
}

AiStance parse_ai_stance(const json& v) {
  const auto s = squash(read_string(v, "ai_stance"));
  if (s == "positive") return AiStance::positive;
  if (s == "neutral") return AiStance::neutral;
  if (s == "negative") return AiStance::negative;
  if (s == "unclear") return AiStance::unclear;
  throw AnnotationError("field AiStance has unknown value " + v.dump());
}

RealOrAi parse_real_or_ai(const json& v) {
  const auto s = squash(read_string(v, "real_or_ai"));
  if (s == "real" || s == "realphoto" || s == "photo") return RealOrAi::real;
  if (s == "ai" || s == "aigenerated" || s == "generated") return RealOrAi::ai;
  throw AnnotationError("field RealOrAi has unknown value " + v.dump());
}

template <std::size_t N>
std::size_t field_index(const std::array<std::string_view, N>& fields, std::string_view name) {
  for (std::size_t i = 0; i < N; ++i) {
    if (fields[i] == name) return i;
  }
  throw SchemaError("unknown annotation field " + std::string(name));
}

std::string join_prefix(std::string_view prefix, std::string_view field) {
  if (prefix.empty()) return std::string(field);
  return std::string(prefix) + "_" + std::string(field);
}

}  // namespace

std::string_view to_string(InfoDirection d) {
  switch (d) {
    case InfoDirection::seeking: return "seeking";
    case InfoDirection::providing: return "providing";
    case InfoDirection::both: return "both";
    case InfoDirection::neither: return "neither";
    case InfoDirection::unclear: return "unclear";
  }
  return "unclear";
}

std::string_view to_string(AiStance s) {
  switch (s) {
    case AiStance::positive: return "positive";
    case AiStance::neutral: return "neutral";
    case AiStance::negative: return "negative";
    case AiStance::unclear: return "unclear";
  }
  return "unclear";
}

std::string_view to_string(RealOrAi r) { return r == RealOrAi::real ? "real" : "ai"; }

std::string_view to_string(FrameAggregation a) {
  return a == FrameAggregation::mean ? "mean" : "max";
}

FrameAggregation parse_frame_aggregation(std::string_view s) {
  if (s == "mean") return FrameAggregation::mean;
  if (s == "max") return FrameAggregation::max;
  throw ConfigError("unknown frame aggregation '" + std::string(s) + "' (expected mean|max)");
}

std::string display_name(std::string_view canonical) {
  std::string out;
  bool upper = true;
  for (char c : canonical) {
    if (c == '_') {
      upper = true;
      continue;
    }
    out.push_back(upper ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : c);
    upper = false;
  }
  return out;
}

double TextAnnotation::probability(std::string_view field) const {
  return probabilities[field_index(kTextProbabilityFields, field)];
}

bool TextAnnotation::operator==(const TextAnnotation& o) const {
  return row_id == o.row_id && probabilities == o.probabilities &&
         info_direction == o.info_direction && mh_conditions == o.mh_conditions &&
         mentioned_profiles == o.mentioned_profiles && platforms == o.platforms &&
         ai_stance == o.ai_stance;
}

double VisualAnnotation::probability(std::string_view field) const {
  return probabilities[field_index(kVisualProbabilityFields, field)];
}

bool VisualAnnotation::operator==(const VisualAnnotation& o) const {
  return row_id == o.row_id && frame == o.frame && description == o.description &&
         real_or_ai == o.real_or_ai && probabilities == o.probabilities &&
         segments == o.segments && extracted == o.extracted;
}

// ---------------------------------------------------------------------------
// parsing

TextAnnotation parse_text_annotation(std::string_view json_text) {
  const json doc = parse_object(json_text);
  TextAnnotation a;
  std::array<bool, kTextProbabilityFields.size()> seen{};
  for (const auto& [key, value] : doc.items()) {
    if (auto f = lookup(text_aliases(), key)) {
      const auto i = field_index(kTextProbabilityFields, *f);
      a.probabilities[i] = read_probability(value, *f, a.warnings);
      seen[i] = true;
      continue;
    }
    auto other = lookup(text_other_aliases(), key);
    if (!other) continue;  // extra keys are tolerated
    if (*other == "row_id") {
      a.row_id = read_string(value, "row_id");
    } else if (*other == "info_direction") {
      a.info_direction = parse_info_direction(value);
    } else if (*other == "mh_conditions") {
      a.mh_conditions = read_list(value, *other);
    } else if (*other == "mentioned_profiles") {
      a.mentioned_profiles = read_list(value, *other);
    } else if (*other == "platforms") {
      a.platforms = read_list(value, *other);
    } else if (*other == "ai_stance") {
      if (!value.is_null()) a.ai_stance = parse_ai_stance(value);
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) {
      throw AnnotationError("missing required field " + display_name(kTextProbabilityFields[i]));
    }
  }
  return a;
}

VisualAnnotation parse_visual_annotation(std::string_view json_text) {
  const json doc = parse_object(json_text);
  VisualAnnotation a;
  std::array<bool, kVisualProbabilityFields.size()> seen{};
  bool have_kind = false;
  for (const auto& [key, value] : doc.items()) {
    auto f = lookup(visual_aliases(), key);
    if (!f) continue;
    const auto& name = *f;
    if (auto it = std::find(kVisualProbabilityFields.begin(), kVisualProbabilityFields.end(), name);
        it != kVisualProbabilityFields.end()) {
      const auto i = static_cast<std::size_t>(it - kVisualProbabilityFields.begin());
      a.probabilities[i] = read_probability(value, name, a.warnings);
      seen[i] = true;
    } else if (name == "row_id") {
      a.row_id = read_string(value, name);
    } else if (name == "frame") {
      if (!value.is_number_integer()) throw AnnotationError("field Frame must be an integer");
      a.frame = value.get<int>();
    } else if (name == "description") {
      a.description = value.is_null() ? std::string() : read_string(value, name);
    } else if (name == "real_or_ai") {
      a.real_or_ai = parse_real_or_ai(value);
      have_kind = true;
    } else if (name == "segments") {
      if (value.is_null()) continue;
      auto n = as_percent(value);
      if (!n || *n < 0 || std::floor(*n) != *n) {
        throw AnnotationError("field Segments must be a non-negative integer");
      }
      a.segments = static_cast<int>(*n);
    } else {
      auto list = read_list(value, name);
      if (!list.empty()) a.extracted[name] = std::move(list);
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) {
      throw AnnotationError("missing required field " + display_name(kVisualProbabilityFields[i]));
    }
  }
  if (!have_kind) throw AnnotationError("missing required field RealOrAi");
  // soft check: segment counts only make sense on frames that could be split
  if (a.segments && *a.segments > 1 && a.probability("split") == 0.0) ++a.warnings;
  return a;
}

std::string to_json(const TextAnnotation& a) {
  json doc = json::object();
  if (!a.row_id.empty()) doc["row_id"] = a.row_id;
  for (std::size_t i = 0; i < kTextProbabilityFields.size(); ++i) {
    doc[std::string(kTextProbabilityFields[i])] = a.probabilities[i];
  }
  doc["info_direction"] = std::string(to_string(a.info_direction));
  doc["mh_conditions"] = a.mh_conditions;
  doc["mentioned_profiles"] = a.mentioned_profiles;
  doc["platforms"] = a.platforms;
  doc["ai_stance"] = a.ai_stance ? json(std::string(to_string(*a.ai_stance))) : json(nullptr);
  return doc.dump();
}

std::string to_json(const VisualAnnotation& a) {
  json doc = json::object();
  if (!a.row_id.empty()) doc["row_id"] = a.row_id;
  doc["frame"] = a.frame;
  doc["description"] = a.description;
  doc["real_or_ai"] = std::string(to_string(a.real_or_ai));
  for (std::size_t i = 0; i < kVisualProbabilityFields.size(); ++i) {
    doc[std::string(kVisualProbabilityFields[i])] = a.probabilities[i];
  }
  doc["segments"] = a.segments ? json(*a.segments) : json(nullptr);
  for (const auto& [k, v] : a.extracted) doc[k] = v;
  return doc.dump();
}

namespace {

template <typename T, typename Parse>
std::vector<T> read_jsonl(const std::filesystem::path& path, Parse parse) {
  std::vector<T> out;
  std::size_t line_no = 0;
  for (const auto& line : io::read_lines(path)) {
    ++line_no;
    try {
      out.push_back(parse(line));
    } catch (const Error& e) {
      // keep the original kind, add the location
      if (e.kind() == "ParseError") {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
      throw AnnotationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (out.back().row_id.empty()) {
      throw AnnotationError(path.string() + ":" + std::to_string(line_no) + ": missing row_id");
    }
  }
  return out;
}

}  // namespace

std::vector<TextAnnotation> read_text_annotations(const std::filesystem::path& jsonl) {
  return read_jsonl<TextAnnotation>(jsonl, parse_text_annotation);
}

std::vector<VisualAnnotation> read_visual_annotations(const std::filesystem::path& jsonl) {
  return read_jsonl<VisualAnnotation>(jsonl, parse_visual_annotation);
}

// ---------------------------------------------------------------------------
// flatten

std::string AnnotationColumns::to_csv() const {
  std::vector<std::string> cells{"row_id"};
  for (const auto& c : columns) cells.push_back(c.name);
  std::string out = io::csv_line(cells);
  for (std::size_t r = 0; r < row_ids.size(); ++r) {
    cells.assign(1, row_ids[r]);
    for (std::size_t c = 0; c < columns.size(); ++c) cells.push_back(io::format_double(values(r, c)));
    out += io::csv_line(cells);
  }
  return out;
}

std::string AnnotationColumns::schema_fragment_json() const {
  json cols = json::array();
  for (const auto& c : columns) {
    cols.push_back({{"name", c.name},
                    {"modality", std::string(to_string(c.modality))},
                    {"kind", std::string(to_string(c.kind))},
                    {"range", {0.0, 100.0}}});
  }
  return json{{"columns", cols}}.dump(2) + "\n";
}

namespace {

template <std::size_t N>
std::vector<ColumnSpec> prob_columns(const std::array<std::string_view, N>& fields,
                                     std::string_view prefix, Modality modality) {
  std::vector<ColumnSpec> cols;
  for (auto f : fields) {
    cols.push_back({join_prefix(prefix, f), modality, ColumnKind::probabilistic,
                    Range{0.0, 100.0}});
  }
  return cols;
}

}  // namespace

AnnotationColumns flatten(const std::vector<TextAnnotation>& annotations, std::string_view prefix) {
  AnnotationColumns out;
  if (annotations.empty()) return out;
  out.columns = prob_columns(kTextProbabilityFields, prefix, Modality::text);
  out.values = Matrix(annotations.size(), out.columns.size());
  std::set<std::string> ids;
  for (std::size_t r = 0; r < annotations.size(); ++r) {
    const auto& a = annotations[r];
    if (!ids.insert(a.row_id).second) throw DuplicateIdError("duplicate row_id " + a.row_id);
    for (std::size_t c = 0; c < a.probabilities.size(); ++c) out.values(r, c) = a.probabilities[c];
    out.row_ids.push_back(a.row_id);
    json side = {{"row_id", a.row_id},
                 {join_prefix(prefix, "info_direction"), std::string(to_string(a.info_direction))},
                 {join_prefix(prefix, "mh_conditions"), a.mh_conditions},
                 {join_prefix(prefix, "mentioned_profiles"), a.mentioned_profiles},
                 {join_prefix(prefix, "platforms"), a.platforms},
                 {join_prefix(prefix, "ai_stance"),
                  a.ai_stance ? json(std::string(to_string(*a.ai_stance))) : json(nullptr)}};
    out.sidecar.push_back(side.dump());
  }
  return out;
}

AnnotationColumns flatten(const std::vector<VisualAnnotation>& annotations, std::string_view prefix,
                          FrameAggregation aggregation) {
  AnnotationColumns out;
  if (annotations.empty()) return out;
  out.columns = prob_columns(kVisualProbabilityFields, prefix, Modality::visual);

  // group frames by video, keeping first-seen order
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<const VisualAnnotation*>> groups;
  std::set<std::pair<std::string, int>> seen;
  for (const auto& a : annotations) {
    if (!seen.emplace(a.row_id, a.frame).second) {
      throw DuplicateIdError("duplicate frame " + std::to_string(a.frame) + " for row_id " + a.row_id);
    }
    auto [it, inserted] = groups.try_emplace(a.row_id);
    if (inserted) order.push_back(a.row_id);
    it->second.push_back(&a);
  }

  out.values = Matrix(order.size(), out.columns.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    auto frames = groups[order[r]];
    std::sort(frames.begin(), frames.end(),
              [](const auto* x, const auto* y) { return x->frame < y->frame; });
    for (std::size_t c = 0; c < out.columns.size(); ++c) {
      double acc = aggregation == FrameAggregation::mean ? 0.0 : frames.front()->probabilities[c];
      for (const auto* f : frames) {
        if (aggregation == FrameAggregation::mean) {
          acc += f->probabilities[c];
        } else {
          acc = std::max(acc, f->probabilities[c]);
        }
      }
      if (aggregation == FrameAggregation::mean) acc /= static_cast<double>(frames.size());
      out.values(r, c) = acc;
    }
    out.row_ids.push_back(order[r]);

    json frame_list = json::array();
    for (const auto* f : frames) {
      json fr = {{"frame", f->frame},
                 {"description", f->description},
                 {"real_or_ai", std::string(to_string(f->real_or_ai))},
                 {"segments", f->segments ? json(*f->segments) : json(nullptr)}};
      for (const auto& [k, v] : f->extracted) fr[k] = v;
      frame_list.push_back(std::move(fr));
    }
    out.sidecar.push_back(
        json{{"row_id", order[r]}, {join_prefix(prefix, "frames"), frame_list}}.dump());
  }
  return out;
}

// ---------------------------------------------------------------------------
// mock annotator

namespace {

struct KeywordRule {
  std::string_view field;
  std::vector<std::string_view> keywords;
  double level;
};

// Each rule lifts its field to `level` plus a little jitter when any keyword
// appears in the lowercased text.
const std::vector<KeywordRule>& keyword_rules() {
  static const std::vector<KeywordRule> rules = {
      {"humor", {"lol", "lmao", "haha", "funny", "joke", "meme"}, 80},
      {"informational_support", {"tips", "how to", "advice", "guide", "learn", "steps"}, 75},
      {"emotional_support", {"not alone", "here for you", "love you", "support", "hug"}, 75},
      {"coping_strategies", {"coping", "cope", "breathe", "breathing", "grounding", "journal"}, 75},
      {"self_disclosure", {"my ", "i have", "i've", "i'm", "i am", "me "}, 70},
      {"situational_stressors", {"exam", "work", "school", "job", "deadline", "stress"}, 70},
      {"communication", {"talk", "conversation", "speak", "tell"}, 70},
      {"interpersonal_relationships", {"friend", "family", "partner", "relationship", "mom", "dad"}, 70},
      {"self_growth", {"growth", "progress", "healing", "better every"}, 70},
      {"healthcare", {"therapy", "therapist", "doctor", "medication", "diagnos", "hospital"}, 75},
      {"awareness", {"awareness", "did you know", "educat", "stigma"}, 70},
      {"advocacy", {"advocate", "stigma", "policy change", "rights"}, 70},
      {"call_to_action", {"reach out", "seek help", "donate", "share this", "follow for"}, 75},
      {"instrumental_support", {"hotline", "free resource", "resources", "donate"}, 70},
      {"appraisal_support", {"proud of", "you did", "feedback", "you're doing"}, 70},
      {"llm_ai", {"chatgpt", "chatbot", "llm", " ai "}, 80},
      {"technology", {"app", "phone", "tech", "online"}, 65},
      {"covid19", {"covid", "pandemic", "lockdown", "quarantine"}, 85},
      {"political", {"election", "government", "president", "congress"}, 75},
      {"healthcare", {"insurance", "clinic"}, 70},
      {"economic", {"money", "rent", "inflation", "economy"}, 70},
      {"climate", {"climate", "global warming"}, 80},
      {"immigration", {"immigra", "border", "visa"}, 75},
      {"crime", {"police", "crime", "arrest"}, 75},
      {"foreign_affairs", {"war", "foreign", "abroad"}, 65},
  };
  return rules;
}

template <typename Words>
bool contains_any(std::string_view text, const Words& words) {
  return std::any_of(words.begin(), words.end(),
                     [&](std::string_view w) { return text.find(w) != std::string_view::npos; });
}

bool contains_any(std::string_view text, std::initializer_list<std::string_view> words) {
  return contains_any<std::initializer_list<std::string_view>>(text, words);
}

// Stable jitter in [0, span) from a hash of (seed, text, field).
double jitter(std::uint64_t seed, std::string_view text, std::string_view field, double span) {
  const auto h = io::sha256_hex(std::to_string(seed) + '\x1f' + std::string(text) + '\x1f' +
                                std::string(field));
  const auto v = std::stoull(h.substr(0, 12), nullptr, 16);
  return span * static_cast<double>(v) / static_cast<double>(1ULL << 48);
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

TextAnnotation MockAnnotator::annotate(std::string_view text) const {
  TextAnnotation a;
  const std::string t = " " + lower(text) + " ";
  bool blank = std::all_of(text.begin(), text.end(),
                           [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
  if (blank) return a;  // all zero, direction unclear

  for (std::size_t i = 0; i < kTextProbabilityFields.size(); ++i) {
    a.probabilities[i] = round2(jitter(seed_, text, kTextProbabilityFields[i], 10.0));
  }
  for (const auto& rule : keyword_rules()) {
    if (!contains_any(t, rule.keywords)) continue;
    const auto i = field_index(kTextProbabilityFields, rule.field);
    const double v = round2(rule.level + jitter(seed_, text, rule.field, 20.0));
    a.probabilities[i] = std::max(a.probabilities[i], std::min(v, 99.0));
  }

  const bool seeking = t.find('?') != std::string::npos || contains_any(t, {"anyone", "how do i", "help me"});
  const bool providing = a.probability("informational_support") >= 50.0;
  a.info_direction = seeking && providing ? InfoDirection::both
                     : seeking            ? InfoDirection::seeking
                     : providing          ? InfoDirection::providing
                                          : InfoDirection::neither;

  for (std::string_view c : {"anxiety", "depression", "ptsd", "ocd", "adhd", "bipolar", "panic",
                             "eating disorder", "insomnia"}) {
    if (t.find(c) != std::string::npos) a.mh_conditions.emplace_back(c);
  }
  for (std::string_view p : {"instagram", "twitter", "youtube", "facebook", "snapchat", "reddit"}) {
    if (t.find(p) != std::string::npos) a.platforms.emplace_back(p);
  }
  std::string word;
  auto flush = [&] {
    if (word.size() > 1 && word[0] == '@') a.mentioned_profiles.push_back(word);
    word.clear();
  };
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '@') {
      word.push_back(c);
    } else {
      flush();
    }
  }
  flush();

  if (a.probability("llm_ai") >= 50.0) {
    a.ai_stance = contains_any(t, {"love", "helpful", "great", "amazing"}) ? AiStance::positive
                  : contains_any(t, {"hate", "bad", "dangerous", "worse"}) ? AiStance::negative
                                                                            : AiStance::neutral;
  }
  return a;
}

TextAnnotation mock_annotate(std::string_view text, std::uint64_t seed) {
  return MockAnnotator(seed).annotate(text);
}

// ---------------------------------------------------------------------------
// agreement

std::string canonical_category(std::string_view key) {
  if (auto f = lookup(category_aliases(), key)) return *f;
  std::string out;
  bool pending = false;
  for (char ch : key) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      if (pending && !out.empty()) out.push_back('_');
      pending = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      pending = true;
    }
  }
  return out;
}

AgreementReport agreement(const std::vector<MachineLabels>& machine,
                          const std::vector<HumanLabels>& human, double threshold) {
  if (!(threshold > 0.0 && threshold < 100.0)) {
    throw ConfigError("agreement threshold must lie in (0, 100), got " + io::format_double(threshold));
  }
  if (machine.size() != human.size()) {
    throw JoinError("machine has " + std::to_string(machine.size()) + " records, human has " +
                    std::to_string(human.size()));
  }
  std::unordered_map<std::string, const MachineLabels*> by_id;
  for (const auto& m : machine) {
    if (!by_id.emplace(m.row_id, &m).second) throw DuplicateIdError("duplicate row_id " + m.row_id);
  }
  AgreementReport report;
  report.threshold = threshold;
  report.n = human.size();
  std::set<std::string> human_ids;
  std::size_t matches = 0;
  for (const auto& h : human) {
    if (!human_ids.insert(h.row_id).second) throw DuplicateIdError("duplicate row_id " + h.row_id);
    auto it = by_id.find(h.row_id);
    if (it == by_id.end()) throw JoinError("row_id " + h.row_id + " has no machine record");
    for (const auto& [cat, label] : h.labels) {
      auto p = it->second->probabilities.find(cat);
      if (p == it->second->probabilities.end()) {
        throw JoinError("row_id " + h.row_id + " has no machine value for " + cat);
      }
      const int predicted = p->second >= threshold ? 1 : 0;
      auto& c = report.per_category[cat];
      ++c.total;
      if (predicted == label) {
        ++c.matches;
        ++matches;
      }
      ++report.n_judgments;
    }
  }
  double sum = 0.0;
  for (auto& [cat, c] : report.per_category) {
    c.accuracy = c.total ? 100.0 * static_cast<double>(c.matches) / static_cast<double>(c.total) : 0.0;
    sum += c.accuracy;
  }
  if (report.n_judgments) {
    report.overall = 100.0 * static_cast<double>(matches) / static_cast<double>(report.n_judgments);
    report.mean_of_categories = sum / static_cast<double>(report.per_category.size());
  }
  return report;
}

std::vector<MachineLabels> parse_machine_labels(std::string_view jsonl) {
  std::vector<MachineLabels> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= jsonl.size()) {
    auto end = jsonl.find('\n', start);
    if (end == std::string_view::npos) end = jsonl.size();
    auto line = jsonl.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (end == jsonl.size()) break;
      continue;
    }
    json doc;
    try {
      doc = parse_object(line);
    } catch (const ParseError& e) {
      throw ParseError("machine labels line " + std::to_string(line_no) + ": " + e.what());
    }
    MachineLabels m;
    for (const auto& [key, value] : doc.items()) {
      if (squash(key) == "rowid" || squash(key) == "id") {
        m.row_id = read_string(value, "row_id");
        continue;
      }
      if (value.is_boolean()) {
        m.probabilities[canonical_category(key)] = value.get<bool>() ? 100.0 : 0.0;
      } else if (auto p = as_percent(value)) {
        m.probabilities[canonical_category(key)] = *p;
      }
      // non-numeric fields (descriptions, lists) are not categories
    }
    if (m.row_id.empty()) {
      throw AnnotationError("machine labels line " + std::to_string(line_no) + ": missing row_id");
    }
    out.push_back(std::move(m));
    if (end == jsonl.size()) break;
  }
  return out;
}

std::vector<HumanLabels> parse_human_labels(std::string_view csv) {
  const auto doc = io::parse_csv(csv);
  const auto id_col = doc.find("row_id");
  if (!id_col) throw SchemaError("human labels need a row_id column");
  std::vector<HumanLabels> out;
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    HumanLabels h;
    h.row_id = doc.rows[r][*id_col];
    for (std::size_t c = 0; c < doc.header.size(); ++c) {
      if (c == *id_col) continue;
      const auto cell = lower(doc.rows[r][c]);
      if (cell.empty()) continue;  // unlabeled
      int label;
      if (cell == "1" || cell == "true" || cell == "yes") {
        label = 1;
      } else if (cell == "0" || cell == "false" || cell == "no") {
        label = 0;
      } else {
        throw ParseError("human labels row " + std::to_string(r + 2) + ", column " +
                         doc.header[c] + ": expected a binary label, got '" + doc.rows[r][c] + "'");
      }
      h.labels[canonical_category(doc.header[c])] = label;
    }
    out.push_back(std::move(h));
  }
  return out;
}

std::string agreement_to_json(const AgreementReport& report) {
  json per = json::object();
  for (const auto& [cat, c] : report.per_category) {
    per[cat] = {{"accuracy", c.accuracy}, {"matches", c.matches}, {"total", c.total}};
  }
  json doc = {{"per_category", per},
              {"overall", report.overall},
              {"mean_of_categories", report.mean_of_categories},
              {"n", report.n},
              {"n_judgments", report.n_judgments},
              {"threshold", report.threshold}};
  return doc.dump(2) + "\n";
}

}  // namespace modal_attrib
