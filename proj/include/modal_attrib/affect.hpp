#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace modal_attrib {

enum class Emotion { happiness, sadness, anger, fear, surprise, disgust, neutral };
enum class SentimentSource { caption, transcript };
enum class CiMethod { normal, bootstrap };

constexpr std::array<Emotion, 7> kEmotions{Emotion::happiness, Emotion::sadness, Emotion::anger,
                                           Emotion::fear,      Emotion::surprise, Emotion::disgust,
                                           Emotion::neutral};

std::string_view to_string(Emotion e);
std::string_view to_string(SentimentSource s);
std::string_view to_string(CiMethod m);
Emotion parse_emotion(std::string_view s);
SentimentSource parse_sentiment_source(std::string_view s);
CiMethod parse_ci_method(std::string_view s);

// One video (or one frame, when frame-level analysis is requested).
struct AffectRecord {
  std::string row_id;
  std::array<double, 7> emotions{};  // intensities in [0, 1], kEmotions order
  double caption_sentiment = 0.0;     // compound score in [-1, 1]
  double transcript_sentiment = 0.0;

  double emotion(Emotion e) const { return emotions[static_cast<std::size_t>(e)]; }
  double sentiment(SentimentSource s) const {
    return s == SentimentSource::caption ? caption_sentiment : transcript_sentiment;
  }
};

// SchemaError if an intensity leaves [0, 1] or a sentiment leaves [-1, 1].
void validate(const AffectRecord& record);

struct AffectAggregate {
  std::string row_id;
  double positive_affect = 0.0;  // mean(happiness, surprise, neutral)
  double negative_affect = 0.0;  // mean(anger, disgust, fear, sadness)
};

std::vector<AffectAggregate> affect_aggregate(const std::vector<AffectRecord>& records);

// Collapses frame records sharing a row_id to one record holding the mean of
// each field, in first-appearance order.
std::vector<AffectRecord> video_level(const std::vector<AffectRecord>& frames);

struct AffectOptions {
  CiMethod ci_method = CiMethod::normal;
  double ci_level = 0.95;
  std::size_t bootstrap_resamples = 1000;
  std::uint64_t seed = 0;
};

struct AffectCell {
  Emotion emotion = Emotion::happiness;
  SentimentSource source = SentimentSource::caption;
  double weighted_mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n = 0;
  bool ci_defined = false;  // false when n < 2; the interval then collapses to the mean
};

// Mean of emotion_k * sentiment_k with a confidence interval.
AffectCell weighted_sentiment(const std::vector<AffectRecord>& records, Emotion emotion,
                              SentimentSource source, const AffectOptions& options = {});

// Every emotion x source cell.
std::vector<AffectCell> affect_comparison(const std::vector<AffectRecord>& records,
                                          const AffectOptions& options = {});

std::vector<AffectRecord> read_affect_csv(const std::filesystem::path& path);
std::vector<AffectRecord> parse_affect_csv(std::string_view text);
std::string affect_comparison_to_csv(const std::vector<AffectCell>& cells);
std::string affect_aggregates_to_csv(const std::vector<AffectAggregate>& rows);

}  // namespace modal_attrib
