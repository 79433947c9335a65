// modal_attrib command-line tool. Subcommands and flags come from the
// pipeline command table; see README.md for the files each one writes.

#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "modal_attrib/errors.hpp"
#include "modal_attrib/io.hpp"
#include "modal_attrib/pipeline.hpp"

namespace pl = modal_attrib::pipeline;
using nlohmann::json;

namespace {

int report_error(std::string_view kind, std::string_view message) {
  std::cerr << json{{"kind", kind}, {"message", message}}.dump() << '\n';
  return 2;
}

std::string dashed(std::string key) {
  for (auto& c : key) {
    if (c == '_') c = '-';
  }
  return key;
}

// Raw flag values collected by CLI11 before typing.
struct Collected {
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
};

json typed_value(const pl::OptionSpec& o, const std::string& raw) {
  switch (o.type) {
    case pl::OptionType::integer: {
      std::size_t pos = 0;
      long long v = 0;
      try {
        v = std::stoll(raw, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos == 0 || pos != raw.size()) {
        throw modal_attrib::ConfigError("--" + dashed(o.key) + " expects an integer, got '" + raw + "'");
      }
      return v;
    }
    case pl::OptionType::number: {
      auto v = modal_attrib::io::parse_double(raw);
      if (!v) throw modal_attrib::ConfigError("--" + dashed(o.key) + " expects a number, got '" + raw + "'");
      return *v;
    }
    default:
      return raw;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"modal_attrib: multimodal feature attribution pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "modal_attrib 0.1.0");

  std::map<std::string, std::unique_ptr<Collected>> collected;
  std::map<std::string, CLI::App*> subs;
  for (const auto& spec : pl::commands()) {
    auto* sub = app.add_subcommand(spec.name, spec.help);
    auto& store = *collected.emplace(spec.name, std::make_unique<Collected>()).first->second;
    for (const auto& o : spec.options) {
      const std::string flag = "--" + dashed(o.key);
      if (o.type == pl::OptionType::flag) {
        sub->add_flag_callback(flag, [&store, key = o.key] { store.flags[key] = true; }, o.help);
        if (o.default_value.is_boolean() && o.default_value.get<bool>()) {
          sub->add_flag_callback("--no-" + dashed(o.key), [&store, key = o.key] { store.flags[key] = false; },
                                 "disable " + flag);
        }
        continue;
      }
      std::string help = o.help;
      if (!o.default_value.is_null()) {
        help += " [default: " +
                (o.default_value.is_string() ? o.default_value.get<std::string>() : o.default_value.dump()) + "]";
      }
      auto* option = sub->add_option(flag, store.values[o.key], help);
      if (o.required) option->required();
    }
    subs[spec.name] = sub;
  }

  std::string manifest_path;
  std::string rerun_out;
  bool rerun_check = false;
  auto* rerun = app.add_subcommand("rerun", "replay a run from its manifest.json");
  rerun->add_option("--manifest", manifest_path, "manifest.json of the run to replay")->required();
  rerun->add_option("--out", rerun_out, "write to this directory instead of the recorded one");
  rerun->add_flag("--check", rerun_check, "fail unless every output hash matches the manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("UsageError", e.what());
  }

  try {
    pl::RunResult result;
    if (rerun->parsed()) {
      std::optional<std::filesystem::path> out;
      if (!rerun_out.empty()) out = rerun_out;
      result = pl::rerun(manifest_path, out, rerun_check);
    } else {
      for (const auto& spec : pl::commands()) {
        if (!subs[spec.name]->parsed()) continue;
        const auto& store = *collected[spec.name];
        json cfg = json::object();
        for (const auto& o : spec.options) {
          auto* option = subs[spec.name]->get_option_no_throw("--" + dashed(o.key));
          if (o.type == pl::OptionType::flag) {
            if (auto it = store.flags.find(o.key); it != store.flags.end()) cfg[o.key] = it->second;
          } else if (option && option->count() > 0) {
            cfg[o.key] = typed_value(o, store.values.at(o.key));
          }
        }
        result = pl::run(spec.name, cfg);
        break;
      }
    }
    json summary = {{"command", result.manifest["command"]},
                    {"out", result.out_dir.string()},
                    {"manifest", (result.out_dir / pl::kManifestName).string()},
                    {"outputs", json::array()}};
    for (const auto& [name, entry] : result.manifest["outputs"].items()) summary["outputs"].push_back(name);
    std::cout << summary.dump() << '\n';
    return 0;
  } catch (const modal_attrib::Error& e) {
    return report_error(e.kind(), e.what());
  } catch (const std::exception& e) {
    std::cerr << json{{"kind", "InternalError"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
}
