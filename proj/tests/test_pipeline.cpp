#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <json.hpp>

#include "modal_attrib/errors.hpp"
#include "modal_attrib/io.hpp"
#include "modal_attrib/pipeline.hpp"
#include "test_support.hpp"

namespace pl = modal_attrib::pipeline;
namespace fs = std::filesystem;
using nlohmann::json;
using test_support::TempDir;
using test_support::fixture;

namespace {

json read_json(const fs::path& p) { return json::parse(modal_attrib::io::read_file(p)); }

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult cli(const std::string& args, const TempDir& dir) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd =
      std::string("'") + MODAL_ATTRIB_CLI + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = modal_attrib::io::read_file(out);
  r.err = modal_attrib::io::read_file(err);
  return r;
}

bool have_cli() { return std::string(MODAL_ATTRIB_CLI).size() > 0; }

// simulate -> train -> explain on a small planted table
struct SmallChain {
  TempDir dir;
  fs::path sim, train, explain;

  SmallChain() {
    sim = dir / "sim";
    train = dir / "train";
    explain = dir / "explain";
    pl::run("simulate", {{"spec", fixture("planted_symmetric.json").string()}, {"n_rows", 600}, {"out", sim.string()}});
    pl::run("train", {{"input", (sim / "table.csv").string()},
                      {"schema", (sim / "schema.json").string()},
                      {"iterations", 30},
                      {"max_depth", 3},
                      {"out", train.string()}});
    pl::run("explain", {{"model", (train / "model.json").string()},
                        {"input", (sim / "table.csv").string()},
                        {"schema", (sim / "schema.json").string()},
                        {"split", (train / "split.json").string()},
                        {"background", 32},
                        {"out", explain.string()}});
  }
};

}  // namespace

TEST(Config, DefaultsMaterialized) {
  const auto cfg = pl::resolve_config("explain", {{"model", "m.json"}, {"input", "a.csv"}, {"schema", "s.json"}, {"out", "o"}});
  EXPECT_EQ(cfg["background"], 1024);
  EXPECT_EQ(cfg["rows"], "auto");
  EXPECT_EQ(cfg["seed"], 1);
  EXPECT_EQ(cfg["threads"], 0);
  EXPECT_EQ(cfg["strict"], false);
  EXPECT_TRUE(cfg["split"].is_null());
  EXPECT_TRUE(fs::path(cfg["out"].get<std::string>()).is_absolute());
  EXPECT_EQ(pl::resolve_config("train", {{"input", "a"}, {"schema", "s"}, {"out", "o"}})["preset"], "within");
}

TEST(Config, CrossPresetRecordedInManifest) {
  TempDir dir;
  pl::run("simulate", {{"spec", fixture("planted_symmetric.json").string()}, {"n_rows", 300}, {"out", (dir / "sim").string()}});
  pl::run("train", {{"input", (dir / "sim" / "table.csv").string()},
                    {"schema", (dir / "sim" / "schema.json").string()},
                    {"preset", "cross"},
                    {"out", (dir / "t").string()}});
  const auto m = read_json(dir / "t" / "manifest.json");
  EXPECT_EQ(m["config"]["iterations"], 10000);
  EXPECT_EQ(m["config"]["eval_every"], 1000);
  EXPECT_EQ(m["config"]["patience"], 1);
  EXPECT_EQ(m["config"]["max_depth"], 6);
  const auto report = read_json(dir / "t" / "train_report.json");
  EXPECT_EQ(report["rounds_trained"].get<int>() % 1000, 0);
}

TEST(Config, Rejections) {
  EXPECT_THROW(pl::resolve_config("train", {{"input", "a"}, {"schema", "s"}}), modal_attrib::ConfigError);
  EXPECT_THROW(pl::resolve_config("train", {{"input", "a"}, {"schema", "s"}, {"out", "o"}, {"colour", 1}}),
               modal_attrib::ConfigError);
  EXPECT_THROW(pl::resolve_config("train", {{"input", "a"}, {"schema", "s"}, {"out", "o"}, {"iterations", "x"}}),
               modal_attrib::ConfigError);
  EXPECT_THROW(pl::command("dance"), modal_attrib::ConfigError);
}

TEST(Validate, CaptionFixtureOverall90) {
  TempDir dir;
  const auto r = pl::run("validate", {{"machine", fixture("agreement/caption_machine.jsonl").string()},
                                      {"human", fixture("agreement/caption_human.csv").string()},
                                      {"threshold", 50},
                                      {"out", dir.path().string()}});
  const auto a = read_json(dir / "agreement.json");
  EXPECT_DOUBLE_EQ(a["overall"].get<double>(), 90.0);
  EXPECT_EQ(a["n_judgments"], 200);
  const auto m = read_json(dir / "manifest.json");
  EXPECT_EQ(m["format"], "modal_attrib.manifest/1");
  EXPECT_EQ(m["command"], "validate");
  EXPECT_EQ(m["inputs"].size(), 2u);
  EXPECT_TRUE(m["outputs"].contains("agreement.json"));
}

TEST(Chain, ManifestsAndConfigEcho) {
  SmallChain c;
  const auto tm = read_json(c.train / "manifest.json");
  EXPECT_EQ(tm["config"]["preset"], "within");
  EXPECT_EQ(tm["config"]["iterations"], 30);
  EXPECT_DOUBLE_EQ(tm["config"]["learning_rate"].get<double>(), 0.1);
  EXPECT_EQ(tm["seed"], 1);
  for (const auto& f : {"model.json", "train_report.json", "metrics.json", "split.json"}) {
    EXPECT_TRUE(fs::exists(c.train / f)) << f;
    EXPECT_EQ(tm["outputs"][f]["sha256"].get<std::string>().size(), 64u);
  }

  const auto agg = c.dir / "agg";
  pl::run("aggregate", {{"shap", (c.explain / "shap.csv").string()},
                        {"input", (c.sim / "table.csv").string()},
                        {"schema", (c.sim / "schema.json").string()},
                        {"centering", "median"},
                        {"normalization", "sum"},
                        {"bootstrap", 50},
                        {"out", agg.string()}});
  const auto meta = read_json(agg / "beta_summary_meta.json");
  EXPECT_EQ(meta["centering"], "median");
  EXPECT_EQ(meta["normalization"], "sum");
  const auto csv = modal_attrib::io::read_file(agg / "beta_summary.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "feature,modality,beta_shap,ci_lo,ci_hi,mean_abs_phi,n");

  const auto inter = c.dir / "inter";
  pl::run("interact", {{"model", (c.train / "model.json").string()},
                       {"input", (c.sim / "table.csv").string()},
                       {"schema", (c.sim / "schema.json").string()},
                       {"split", (c.train / "split.json").string()},
                       {"background", 16},
                       {"pairs", "x:y"},
                       {"regressor", "centered_product"},
                       {"out", inter.string()},
                       {"strict", true}});
  const auto patterns = read_json(inter / "patterns.json");
  EXPECT_EQ(patterns.dump().find("centered_product") != std::string::npos, true);

  const auto rep = c.dir / "report";
  pl::run("report", {{"beta", (agg / "beta_summary.csv").string()},
                     {"beeswarm", (agg / "beeswarm.jsonl").string()},
                     {"quadrants", (inter / "quadrants.csv").string()},
                     {"patterns", (inter / "patterns.json").string()},
                     {"out", rep.string()}});
  for (const auto& f : {"report.json", "forest.svg", "beeswarm.svg", "quadrant.svg"}) {
    EXPECT_TRUE(fs::exists(rep / f)) << f;
  }
  EXPECT_EQ(modal_attrib::io::read_file(rep / "forest.svg").rfind("<svg", 0), 0u);
}

TEST(Rerun, ReproducesOutputsByteForByte) {
  SmallChain c;
  const auto again = c.dir / "train_again";
  const auto r = pl::rerun(c.train / "manifest.json", again, true);
  for (const auto& f : {"model.json", "split.json", "train_report.json"}) {
    EXPECT_EQ(modal_attrib::io::read_file(c.train / f), modal_attrib::io::read_file(again / f)) << f;
  }
  EXPECT_EQ(r.out_dir, again);
  const auto shap_again = c.dir / "explain_again";
  pl::rerun(c.explain / "manifest.json", shap_again, true);
  EXPECT_EQ(modal_attrib::io::read_file(c.explain / "shap.csv"), modal_attrib::io::read_file(shap_again / "shap.csv"));
}

TEST(Strict, TamperedUpstreamIsStale) {
  SmallChain c;
  {
    std::ofstream f(c.train / "model.json", std::ios::app);
    f << " ";
  }
  json cfg = {{"model", (c.train / "model.json").string()},
              {"input", (c.sim / "table.csv").string()},
              {"schema", (c.sim / "schema.json").string()},
              {"background", 8},
              {"max_rows", 5},
              {"out", (c.dir / "x").string()}};
  EXPECT_NO_THROW(pl::run("explain", cfg));
  cfg["strict"] = true;
  EXPECT_THROW(pl::run("explain", cfg), modal_attrib::StaleArtifactError);
  // rerun refuses inputs that changed since the recorded run
  EXPECT_THROW(pl::rerun(c.explain / "manifest.json", c.dir / "y"), modal_attrib::StaleArtifactError);
}

TEST(Errors, MissingFiles) {
  TempDir dir;
  std::ofstream(dir / "t.csv") << "row_id,a,views\nr1,1,2\n";
  EXPECT_THROW(pl::run("train", {{"input", (dir / "none.csv").string()},
                                 {"schema", (dir / "none.json").string()},
                                 {"out", (dir / "o").string()}}),
               modal_attrib::IoError);
  EXPECT_THROW(pl::run("train", {{"input", (dir / "t.csv").string()},
                                 {"schema", (dir / "none.json").string()},
                                 {"out", (dir / "o").string()}}),
               modal_attrib::SchemaError);
}

TEST(Cli, MissingSchemaExitsTwoWithJson) {
  if (!have_cli()) GTEST_SKIP() << "CLI not built";
  TempDir dir;
  std::ofstream(dir / "t.csv") << "row_id,a,views\nr1,1,2\n";
  const auto r = cli("train --input '" + (dir / "t.csv").string() + "' --schema '" + (dir / "missing.json").string() +
                         "' --preset within --seed 1 --out '" + (dir / "o").string() + "'",
                     dir);
  EXPECT_EQ(r.code, 2);
  const auto err = json::parse(r.err);
  EXPECT_EQ(err["kind"], "SchemaError");
  EXPECT_FALSE(err["message"].get<std::string>().empty());
}

TEST(Cli, UsageErrors) {
  if (!have_cli()) GTEST_SKIP() << "CLI not built";
  TempDir dir;
  auto r = cli("train --bogus 1", dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(json::parse(r.err)["kind"], "UsageError");
  r = cli("validate --machine a --human b --threshold high --out '" + (dir / "o").string() + "'", dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(json::parse(r.err)["kind"], "ConfigError");
  r = cli("--help", dir);
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("simulate"), std::string::npos);
}

TEST(Cli, ValidateAndRerun) {
  if (!have_cli()) GTEST_SKIP() << "CLI not built";
  TempDir dir;
  const auto out = dir / "v";
  auto r = cli("validate --machine '" + fixture("agreement/transcript_machine.jsonl").string() + "' --human '" +
                   fixture("agreement/transcript_human.csv").string() + "' --threshold 50 --out '" + out.string() + "'",
               dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto summary = json::parse(r.out);
  EXPECT_EQ(summary["command"], "validate");
  EXPECT_DOUBLE_EQ(read_json(out / "agreement.json")["overall"].get<double>(), 86.5);
  r = cli("rerun --manifest '" + (out / "manifest.json").string() + "' --out '" + (dir / "v2").string() + "' --check", dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(modal_attrib::io::read_file(out / "agreement.json"), modal_attrib::io::read_file(dir / "v2" / "agreement.json"));
}

TEST(Cli, BooleanNegation) {
  if (!have_cli()) GTEST_SKIP() << "CLI not built";
  TempDir dir;
  const auto r = cli("aggregate --help", dir);
  EXPECT_NE(r.out.find("--no-group-by-modality"), std::string::npos);
}
