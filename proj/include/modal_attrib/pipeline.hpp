#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace modal_attrib::pipeline {

// Pipeline commands. Each takes a flat JSON config (keys are the long flag
// names with '-' replaced by '_'), writes fixed file names under cfg["out"]
// and finishes by writing manifest.json there.

enum class OptionType { path, string, integer, number, flag };

struct OptionSpec {
  std::string key;
  OptionType type = OptionType::string;
  nlohmann::json default_value;  // null: required, or unset when optional
  bool required = false;
  bool input = false;            // hashed into the manifest, checked under --strict
  std::string help;
};

struct CommandSpec {
  std::string name;
  std::string help;
  std::vector<OptionSpec> options;
  std::vector<std::string> outputs;  // file names written under out/
};

const std::vector<CommandSpec>& commands();
const CommandSpec& command(std::string_view name);  // ConfigError if unknown

// Applies defaults, type-checks, rejects unknown keys, makes paths absolute.
nlohmann::json resolve_config(std::string_view command, const nlohmann::json& given);

struct RunResult {
  nlohmann::json manifest;
  std::filesystem::path out_dir;
};

RunResult run(std::string_view command, const nlohmann::json& config);

// Replays a manifest: same command, same resolved config. Inputs must still
// hash to their recorded values (StaleArtifactError otherwise). With `check`,
// the fresh outputs must also match the recorded hashes.
RunResult rerun(const std::filesystem::path& manifest_path,
                const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                bool check = false);

constexpr std::string_view kManifestName = "manifest.json";
constexpr std::string_view kManifestFormat = "modal_attrib.manifest/1";

}  // namespace modal_attrib::pipeline
