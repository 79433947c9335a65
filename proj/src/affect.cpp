#include "modal_attrib/affect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

#include <boost/math/distributions/normal.hpp>

#include "modal_attrib/errors.hpp"
#include "modal_attrib/io.hpp"

namespace modal_attrib {

std::string_view to_string(Emotion e) {
  switch (e) {
    case Emotion::happiness: return "happiness";
    case Emotion::sadness: return "sadness";
    case Emotion::anger: return "anger";
    case Emotion::fear: return "fear";
    case Emotion::surprise: return "surprise";
    case Emotion::disgust: return "disgust";
    case Emotion::neutral: return "neutral";
  }
  return "neutral";
}

std::string_view to_string(SentimentSource s) {
  return s == SentimentSource::caption ? "caption" : "transcript";
}

std::string_view to_string(CiMethod m) { return m == CiMethod::normal ? "normal" : "bootstrap"; }

Emotion parse_emotion(std::string_view s) {
  for (Emotion e : kEmotions) {
    if (to_string(e) == s) return e;
  }
  throw ConfigError("unknown emotion '" + std::string(s) + "'");
}

SentimentSource parse_sentiment_source(std::string_view s) {
  if (s == "caption") return SentimentSource::caption;
  if (s == "transcript") return SentimentSource::transcript;
  throw ConfigError("unknown sentiment source '" + std::string(s) + "'");
}

CiMethod parse_ci_method(std::string_view s) {
  if (s == "normal") return CiMethod::normal;
  if (s == "bootstrap") return CiMethod::bootstrap;
  throw ConfigError("unknown CI method '" + std::string(s) + "'");
}

void validate(const AffectRecord& record) {
  for (Emotion e : kEmotions) {
    const double v = record.emotion(e);
    if (!(v >= 0.0 && v <= 1.0)) {
      throw SchemaError("emotion '" + std::string(to_string(e)) + "' of row '" + record.row_id +
                        "' outside [0, 1]");
    }
  }
  for (SentimentSource s : {SentimentSource::caption, SentimentSource::transcript}) {
    const double v = record.sentiment(s);
    if (!(v >= -1.0 && v <= 1.0)) {
      throw SchemaError(std::string(to_string(s)) + " sentiment of row '" + record.row_id +
                        "' outside [-1, 1]");
    }
  }
}

std::vector<AffectAggregate> affect_aggregate(const std::vector<AffectRecord>& records) {
  std::vector<AffectAggregate> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    validate(r);
    const double pos = (r.emotion(Emotion::happiness) + r.emotion(Emotion::surprise) +
                        r.emotion(Emotion::neutral)) / 3.0;
    const double neg = (r.emotion(Emotion::anger) + r.emotion(Emotion::disgust) +
                        r.emotion(Emotion::fear) + r.emotion(Emotion::sadness)) / 4.0;
    out.push_back(AffectAggregate{r.row_id, std::clamp(pos, 0.0, 1.0), std::clamp(neg, 0.0, 1.0)});
  }
  return out;
}

std::vector<AffectRecord> video_level(const std::vector<AffectRecord>& frames) {
  std::vector<AffectRecord> out;
  std::vector<std::size_t> counts;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& f : frames) {
    validate(f);
    auto [it, inserted] = slot.try_emplace(f.row_id, out.size());
    if (inserted) {
      AffectRecord r;
      r.row_id = f.row_id;
      r.emotions.fill(0.0);
      out.push_back(r);
      counts.push_back(0);
    }
    auto& acc = out[it->second];
    for (std::size_t e = 0; e < 7; ++e) acc.emotions[e] += f.emotions[e];
    acc.caption_sentiment += f.caption_sentiment;
    acc.transcript_sentiment += f.transcript_sentiment;
    ++counts[it->second];
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double c = static_cast<double>(counts[i]);
    for (auto& e : out[i].emotions) e /= c;
    out[i].caption_sentiment /= c;
    out[i].transcript_sentiment /= c;
  }
  return out;
}

AffectCell weighted_sentiment(const std::vector<AffectRecord>& records, Emotion emotion,
                              SentimentSource source, const AffectOptions& options) {
  if (!(options.ci_level > 0.0 && options.ci_level < 1.0)) throw ConfigError("ci_level must lie in (0, 1)");
  AffectCell cell;
  cell.emotion = emotion;
  cell.source = source;
  cell.n = records.size();
  if (records.empty()) throw ConfigError("weighted_sentiment needs at least one record");

  std::vector<double> products(records.size());
  for (std::size_t k = 0; k < records.size(); ++k) {
    validate(records[k]);
    products[k] = records[k].emotion(emotion) * records[k].sentiment(source);
  }
  const double n = static_cast<double>(products.size());
  cell.weighted_mean = std::accumulate(products.begin(), products.end(), 0.0) / n;
  cell.ci_lo = cell.ci_hi = cell.weighted_mean;
  if (products.size() < 2) return cell;
  cell.ci_defined = true;

  if (options.ci_method == CiMethod::normal) {
    double ss = 0.0;
    for (double v : products) ss += (v - cell.weighted_mean) * (v - cell.weighted_mean);
    const double se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    const double z =
        boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + options.ci_level / 2.0);
    cell.ci_lo = cell.weighted_mean - z * se;
    cell.ci_hi = cell.weighted_mean + z * se;
  } else {
    std::mt19937_64 rng(options.seed);
    std::uniform_int_distribution<std::size_t> pick(0, products.size() - 1);
    std::vector<double> means(std::max<std::size_t>(options.bootstrap_resamples, 1));
    for (auto& m : means) {
      double sum = 0.0;
      for (std::size_t k = 0; k < products.size(); ++k) sum += products[pick(rng)];
      m = sum / n;
    }
    std::sort(means.begin(), means.end());
    const double alpha = (1.0 - options.ci_level) / 2.0;
    auto quantile = [&](double q) {
      const double pos = q * static_cast<double>(means.size() - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const std::size_t hi = std::min(lo + 1, means.size() - 1);
      return means[lo] + (pos - static_cast<double>(lo)) * (means[hi] - means[lo]);
    };
    cell.ci_lo = std::min(quantile(alpha), cell.weighted_mean);
    cell.ci_hi = std::max(quantile(1.0 - alpha), cell.weighted_mean);
  }
  return cell;
}

std::vector<AffectCell> affect_comparison(const std::vector<AffectRecord>& records,
                                          const AffectOptions& options) {
  std::vector<AffectCell> out;
  for (Emotion e : kEmotions) {
    for (SentimentSource s : {SentimentSource::caption, SentimentSource::transcript}) {
      out.push_back(weighted_sentiment(records, e, s, options));
    }
  }
  return out;
}

std::vector<AffectRecord> parse_affect_csv(std::string_view text) {
  const auto doc = io::parse_csv(text);
  auto col = [&](std::string_view name) {
    auto c = doc.find(name);
    if (!c) throw SchemaError("affect CSV lacks column '" + std::string(name) + "'");
    return *c;
  };
  const std::size_t c_id = col("row_id");
  std::array<std::size_t, 7> c_em{};
  for (std::size_t e = 0; e < 7; ++e) c_em[e] = col(to_string(kEmotions[e]));
  const std::size_t c_cap = col("caption_sentiment");
  const std::size_t c_tr = col("transcript_sentiment");

  std::vector<AffectRecord> out;
  out.reserve(doc.rows.size());
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    const auto& row = doc.rows[r];
    auto num = [&](std::size_t c) {
      auto v = io::parse_double(row[c]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError("unparseable cell '" + row[c] + "' at row " + std::to_string(r + 1) +
                         ", column '" + doc.header[c] + "'");
      }
      return *v;
    };
    AffectRecord rec;
    rec.row_id = row[c_id];
    for (std::size_t e = 0; e < 7; ++e) rec.emotions[e] = num(c_em[e]);
    rec.caption_sentiment = num(c_cap);
    rec.transcript_sentiment = num(c_tr);
    validate(rec);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<AffectRecord> read_affect_csv(const std::filesystem::path& path) {
  return parse_affect_csv(io::read_file(path));
}

std::string affect_comparison_to_csv(const std::vector<AffectCell>& cells) {
  std::string out = "emotion,source,weighted_mean,ci_lo,ci_hi,n\n";
  for (const auto& c : cells) {
    out += io::csv_line({std::string(to_string(c.emotion)), std::string(to_string(c.source)),
                         io::format_double(c.weighted_mean),
                         c.ci_defined ? io::format_double(c.ci_lo) : "",
                         c.ci_defined ? io::format_double(c.ci_hi) : "", std::to_string(c.n)});
  }
  return out;
}

std::string affect_aggregates_to_csv(const std::vector<AffectAggregate>& rows) {
  std::string out = "row_id,positive_affect,negative_affect\n";
  for (const auto& r : rows) {
    out += io::csv_line({r.row_id, io::format_double(r.positive_affect), io::format_double(r.negative_affect)});
  }
  return out;
}

}  // namespace modal_attrib
