#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "modal_attrib/interactions.hpp"
#include "modal_attrib/table.hpp"

namespace modal_attrib {

enum class FeatureDistribution { uniform_0_100, bernoulli_scaled };
enum class Scenario { x_threshold, y_threshold, symmetric };
// bilinear: gated |u|,|v| products whose mixed partial has the planted sign in
// every active quadrant. step: pure sign/indicator steps.
enum class InteractionForm { bilinear, step };

std::string_view to_string(FeatureDistribution d);
std::string_view to_string(Scenario s);
std::string_view to_string(InteractionForm f);
FeatureDistribution parse_distribution(std::string_view s);
Scenario parse_scenario(std::string_view s);
InteractionForm parse_interaction_form(std::string_view s);
Pattern expected_pattern(Scenario s);

struct PlantedFeature {
  std::string name;
  Modality modality = Modality::meta;
  FeatureDistribution distribution = FeatureDistribution::uniform_0_100;
};

struct MainEffect {
  std::string feature;
  double coefficient = 0.0;  // per unit of x / 100
};

struct PlantedInteraction {
  std::string feature_x;
  std::string feature_y;
  Scenario scenario = Scenario::symmetric;
  double magnitude = 1.0;
  InteractionForm form = InteractionForm::bilinear;
};

struct PlantedSpec {
  std::size_t n_rows = 1000;
  std::vector<PlantedFeature> features;
  std::vector<MainEffect> main_effects;
  std::vector<PlantedInteraction> interactions;
  double noise_sd = 0.0;
  double intercept = 0.0;
  std::uint64_t seed = 0;

  // ConfigError on unknown feature references, non-finite values, noise < 0.
  void validate() const;
};

// Value of one planted interaction term at raw 0-100 coordinates.
double interaction_term(const PlantedInteraction& term, double x, double y);

// Sign of the planted mixed partial per quadrant (quadrant order), in {-1, 0, 1}.
std::array<int, 4> expected_quadrant_signs(const PlantedInteraction& term);

struct GeneratedData {
  FeatureTable table;
  PlantedSpec spec;
};

GeneratedData generate(const PlantedSpec& spec);

PlantedSpec planted_spec_from_json(std::string_view text);
std::string planted_spec_to_json(const PlantedSpec& spec);
std::string ground_truth_json(const PlantedSpec& spec);

// Writes table.csv, schema.json and ground_truth.json into `dir`.
void write_generated(const GeneratedData& data, const std::filesystem::path& dir);

}  // namespace modal_attrib
