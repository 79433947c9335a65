#include "modal_attrib/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include <json.hpp>

#include "modal_attrib/errors.hpp"
#include "modal_attrib/io.hpp"

namespace modal_attrib {

using nlohmann::json;

std::string_view to_string(FeatureDistribution d) {
  return d == FeatureDistribution::uniform_0_100 ? "uniform_0_100" : "bernoulli_scaled";
}

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::x_threshold: return "x_threshold";
    case Scenario::y_threshold: return "y_threshold";
    case Scenario::symmetric: return "symmetric";
  }
  return "symmetric";
}

std::string_view to_string(InteractionForm f) { return f == InteractionForm::bilinear ? "bilinear" : "step"; }

FeatureDistribution parse_distribution(std::string_view s) {
  if (s == "uniform_0_100") return FeatureDistribution::uniform_0_100;
  if (s == "bernoulli_scaled") return FeatureDistribution::bernoulli_scaled;
  throw ConfigError("unknown distribution '" + std::string(s) + "'");
}

Scenario parse_scenario(std::string_view s) {
  if (s == "x_threshold") return Scenario::x_threshold;
  if (s == "y_threshold") return Scenario::y_threshold;
  if (s == "symmetric" || s == "symmetric_sign_change") return Scenario::symmetric;
  throw ConfigError("unknown scenario '" + std::string(s) + "'");
}

InteractionForm parse_interaction_form(std::string_view s) {
  if (s == "bilinear") return InteractionForm::bilinear;
  if (s == "step") return InteractionForm::step;
  throw ConfigError("unknown interaction form '" + std::string(s) + "'");
}

Pattern expected_pattern(Scenario s) {
  switch (s) {
    case Scenario::x_threshold: return Pattern::x_threshold;
    case Scenario::y_threshold: return Pattern::y_threshold;
    case Scenario::symmetric: return Pattern::symmetric_sign_change;
  }
  return Pattern::none;
}

void PlantedSpec::validate() const {
  if (n_rows == 0) throw ConfigError("planted spec needs n_rows >= 1");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw ConfigError("noise_sd must be finite and >= 0");
  if (!std::isfinite(intercept)) throw ConfigError("intercept must be finite");
  std::set<std::string> names;
  for (const auto& f : features) {
    if (f.name.empty() || f.name == "row_id" || f.name == "target") {
      throw ConfigError("invalid planted feature name '" + f.name + "'");
    }
    if (!names.insert(f.name).second) throw ConfigError("duplicate planted feature '" + f.name + "'");
  }
  auto known = [&](const std::string& n) {
    if (!names.count(n)) throw ConfigError("planted term references unknown feature '" + n + "'");
  };
  for (const auto& m : main_effects) {
    known(m.feature);
    if (!std::isfinite(m.coefficient)) throw ConfigError("main effect coefficient must be finite");
  }
  for (const auto& t : interactions) {
    known(t.feature_x);
    known(t.feature_y);
    if (t.feature_x == t.feature_y) throw ConfigError("interaction needs two distinct features");
    if (!std::isfinite(t.magnitude)) throw ConfigError("interaction magnitude must be finite");
  }
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : v < 0.0 ? -1.0 : 0.0; }

}  // namespace

double interaction_term(const PlantedInteraction& term, double x, double y) {
  const double m = term.magnitude;
  if (term.form == InteractionForm::step) {
    switch (term.scenario) {
      case Scenario::x_threshold: return x > 50.0 ? m * sign(y - 50.0) : 0.0;
      case Scenario::y_threshold: return x > 50.0 ? 0.0 : m * sign(y - 50.0);
      case Scenario::symmetric: return m * sign((x - 50.0) * (y - 50.0));
    }
    return 0.0;
  }
  const double u = (x - 50.0) / 50.0;
  const double v = (y - 50.0) / 50.0;
  switch (term.scenario) {
    case Scenario::x_threshold: return u > 0.0 ? m * u * std::abs(v) : 0.0;
    case Scenario::y_threshold: return u > 0.0 ? 0.0 : m * u * std::abs(v);
    case Scenario::symmetric: return m * std::abs(u) * std::abs(v);
  }
  return 0.0;
}

std::array<int, 4> expected_quadrant_signs(const PlantedInteraction& term) {
  const int s = term.magnitude > 0 ? 1 : term.magnitude < 0 ? -1 : 0;
  switch (term.scenario) {
    case Scenario::x_threshold: return {0, 0, -s, s};
    case Scenario::y_threshold: return {-s, s, 0, 0};
    case Scenario::symmetric: return {s, -s, -s, s};
  }
  return {0, 0, 0, 0};
}

GeneratedData generate(const PlantedSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_rows;
  const std::size_t p = spec.features.size();

  Schema schema;
  schema.target = TargetSpec{"target", TargetTransform::none, TargetTransform::none};
  for (const auto& f : spec.features) {
    const bool binary = f.distribution == FeatureDistribution::bernoulli_scaled;
    schema.columns.push_back(ColumnSpec{f.name, f.modality,
                                        binary ? ColumnKind::binary : ColumnKind::probabilistic,
                                        Range{0.0, 100.0}});
  }

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> uniform(0.0, 100.0);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> noise(0.0, 1.0);

  Matrix values(n, p);
  std::vector<double> target(n);
  std::vector<std::string> ids(n);
  const int width = static_cast<int>(std::to_string(n).size());
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < p; ++c) {
      values(r, c) = spec.features[c].distribution == FeatureDistribution::uniform_0_100
                         ? uniform(rng)
                         : (coin(rng) ? 100.0 : 0.0);
    }
    double y = spec.intercept;
    for (const auto& m : spec.main_effects) {
      y += m.coefficient * values(r, *schema.index_of(m.feature)) / 100.0;
    }
    for (const auto& t : spec.interactions) {
      y += interaction_term(t, values(r, *schema.index_of(t.feature_x)),
                            values(r, *schema.index_of(t.feature_y)));
    }
    // Draw unconditionally so the feature stream is the same for any noise level.
    const double e = noise(rng);
    target[r] = y + spec.noise_sd * e;
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%0*zu", width, r);
    ids[r] = buf;
  }
  return GeneratedData{FeatureTable(std::move(schema), std::move(values), std::move(target), std::move(ids)),
                       spec};
}

PlantedSpec planted_spec_from_json(std::string_view text) {
  PlantedSpec spec;
  try {
    const json doc = json::parse(text);
    spec.n_rows = doc.at("n_rows").get<std::size_t>();
    spec.noise_sd = doc.value("noise_sd", 0.0);
    spec.intercept = doc.value("intercept", 0.0);
    spec.seed = doc.value("seed", std::uint64_t{0});
    for (const auto& f : doc.at("features")) {
      spec.features.push_back(PlantedFeature{
          f.at("name").get<std::string>(), parse_modality(f.value("modality", std::string("meta"))),
          parse_distribution(f.value("distribution", std::string("uniform_0_100")))});
    }
    for (const auto& m : doc.value("main_effects", json::array())) {
      spec.main_effects.push_back(MainEffect{m.at("feature").get<std::string>(), m.at("coefficient").get<double>()});
    }
    for (const auto& t : doc.value("interactions", json::array())) {
      spec.interactions.push_back(PlantedInteraction{
          t.at("feature_x").get<std::string>(), t.at("feature_y").get<std::string>(),
          parse_scenario(t.at("scenario").get<std::string>()), t.value("magnitude", 1.0),
          parse_interaction_form(t.value("form", std::string("bilinear")))});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed planted spec: ") + e.what());
  } catch (const SchemaError& e) {
    throw ConfigError(e.what());
  }
  spec.validate();
  return spec;
}

namespace {

json spec_json(const PlantedSpec& spec) {
  json features = json::array();
  for (const auto& f : spec.features) {
    features.push_back({{"name", f.name},
                        {"modality", std::string(to_string(f.modality))},
                        {"distribution", std::string(to_string(f.distribution))}});
  }
  json mains = json::array();
  for (const auto& m : spec.main_effects) mains.push_back({{"feature", m.feature}, {"coefficient", m.coefficient}});
  json inters = json::array();
  for (const auto& t : spec.interactions) {
    inters.push_back({{"feature_x", t.feature_x},
                      {"feature_y", t.feature_y},
                      {"scenario", std::string(to_string(t.scenario))},
                      {"magnitude", t.magnitude},
                      {"form", std::string(to_string(t.form))}});
  }
  return {{"n_rows", spec.n_rows}, {"noise_sd", spec.noise_sd}, {"intercept", spec.intercept},
          {"seed", spec.seed},     {"features", features},      {"main_effects", mains},
          {"interactions", inters}};
}

}  // namespace

std::string planted_spec_to_json(const PlantedSpec& spec) { return spec_json(spec).dump(2) + "\n"; }

std::string ground_truth_json(const PlantedSpec& spec) {
  json terms = json::array();
  for (const auto& t : spec.interactions) {
    const auto signs = expected_quadrant_signs(t);
    json quadrant_signs = json::object();
    for (std::size_t q = 0; q < 4; ++q) quadrant_signs[std::string(kQuadrantLabels[q])] = signs[q];
    std::string formula;
    if (t.form == InteractionForm::bilinear) {
      formula = t.scenario == Scenario::x_threshold   ? "m * 1[u > 0] * u * |v|"
                : t.scenario == Scenario::y_threshold ? "m * 1[u <= 0] * u * |v|"
                                                      : "m * |u| * |v|";
    } else {
      formula = t.scenario == Scenario::x_threshold   ? "m * 1[x > 50] * sign(y - 50)"
                : t.scenario == Scenario::y_threshold ? "m * 1[x <= 50] * sign(y - 50)"
                                                      : "m * sign((x - 50) * (y - 50))";
    }
    terms.push_back({{"feature_x", t.feature_x},
                     {"feature_y", t.feature_y},
                     {"scenario", std::string(to_string(t.scenario))},
                     {"expected_pattern", std::string(to_string(expected_pattern(t.scenario)))},
                     {"magnitude", t.magnitude},
                     {"form", std::string(to_string(t.form))},
                     {"formula", formula},
                     {"expected_mixed_partial_sign", quadrant_signs}});
  }
  json mains = json::array();
  for (const auto& m : spec.main_effects) {
    mains.push_back({{"feature", m.feature}, {"coefficient", m.coefficient}, {"formula", "c * x / 100"}});
  }
  json doc = {{"spec", spec_json(spec)},
              {"target", "intercept + sum(main) + sum(interaction) + noise_sd * N(0, 1)"},
              {"coordinates", "u = (x - 50) / 50, v = (y - 50) / 50"},
              {"main_effects", mains},
              {"interactions", terms}};
  return doc.dump(2) + "\n";
}

void write_generated(const GeneratedData& data, const std::filesystem::path& dir) {
  write_table(data.table, dir / "table.csv", dir / "schema.json");
  io::write_file(dir / "ground_truth.json", ground_truth_json(data.spec));
}

}  // namespace modal_attrib
