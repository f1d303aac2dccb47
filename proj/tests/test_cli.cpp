#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "alioth/cli.hpp"
#include "alioth/dataprep.hpp"
#include "alioth/neural.hpp"
#include "support.hpp"

using namespace alioth;
namespace fs = std::filesystem;

namespace {

int call(std::vector<std::string> args) {
  args.insert(args.begin(), "alioth");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  return cli::run(static_cast<int>(args.size()), argv.data());
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(testsupport::slurp(p)); }

// Tiny dataset plus its feature table under `dir`.
fs::path tiny_features(const testsupport::TempDir& dir) {
  auto sc = testsupport::tiny_scenario(120);
  for (auto& a : sc.apps) a.noise_scale.assign(a.noise_scale.size(), 0.05);
  simcloud::export_dataset(simcloud::run_all(sc), dir / "data.csv");
  REQUIRE(call({"prep", "--data", (dir / "data.csv").string(), "--out", (dir / "prep").string()}) == 0);
  return dir.path / "prep" / "features.csv";
}

const char* kSmallConfig =
    "[run]\nseed = 3\n"
    "[dae]\nencoder = 8,4\nepochs = 2\n"
    "[gbt]\nn_trees = 5\nmax_depth = 3\ngrid_search = false\n";

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(call({}) == 2);
  CHECK(call({"frobnicate"}) == 2);
  CHECK(call({"gen", "--seed", "notanumber"}) == 2);
  CHECK(call({"prep"}) == 2);
  CHECK(call({"train", "--stage", "dadae", "--source", "x.csv"}) == 2);
  CHECK(call({"train", "--stage", "dadae", "--target", "x.csv"}) == 2);
  CHECK(call({"train", "--stage", "forest", "--data", "x.csv"}) == 2);
  CHECK(call({"--help"}) == 0);
}

TEST_CASE("config parsing") {
  const auto c = cli::parse_config(kSmallConfig);
  CHECK(c.seed == 3);
  CHECK(c.pipeline.seed == 3);
  CHECK(c.pipeline.gbt.n_trees == 5);
  CHECK(!c.pipeline.grid_search);
  CHECK(c.pipeline.arch.encoder_hidden == std::vector<int>{8, 4});
  CHECK_THROWS_AS(cli::parse_config("[gbt]\nn_leaves = 4\n"), UsageError);
  CHECK_THROWS_AS(cli::parse_config("[forest]\nn_trees = 4\n"), UsageError);
  CHECK_THROWS_AS(cli::parse_config("[gbt]\nn_trees = many\n"), UsageError);
  CHECK_THROWS_AS(cli::parse_config("[gbt]\neta = -1\n"), UsageError);
  CHECK_THROWS_AS(cli::parse_config("n_trees = 4\n"), UsageError);

  testsupport::TempDir dir("cfg");
  write_file(dir / "bad.ini", "[gbt]\nn_leaves = 4\n");
  CHECK(call({"gen", "--config", (dir / "bad.ini").string(), "--out", (dir / "o").string()}) == 2);
  CHECK(call({"gen", "--config", (dir / "missing.ini").string(), "--out", (dir / "o").string()}) == 2);
}

TEST_CASE("gen is deterministic and writes the desk row count") {
  testsupport::TempDir dir("gen");
  REQUIRE(call({"gen", "--seed", "9", "--out", (dir / "a").string()}) == 0);
  REQUIRE(call({"gen", "--seed", "9", "--out", (dir / "b").string()}) == 0);
  const auto a = testsupport::slurp(dir.path / "a" / "dataset.csv");
  CHECK(a == testsupport::slurp(dir.path / "b" / "dataset.csv"));
  CHECK(std::count(a.begin(), a.end(), '\n') == 20001);
  CHECK(fs::exists(dir.path / "a" / "manifest.json"));
  CHECK(read_json(dir.path / "a" / "manifest.json").at("seed") == 9);
}

TEST_CASE("train gbt with a singleton grid equals a direct fit") {
  testsupport::TempDir dir("gbt");
  const auto features = tiny_features(dir);
  write_file(dir / "c.ini", kSmallConfig);
  REQUIRE(call({"train", "--stage", "gbt", "--config", (dir / "c.ini").string(), "--data",
                features.string(), "--out", (dir / "t").string()}) == 0);
  auto j = read_json(dir.path / "t" / "model.json");
  j.erase("features");

  const auto cfg = cli::parse_config(kSmallConfig);
  const auto fs = dataprep::read_features(features);
  std::vector<double> y;
  for (const auto& m : fs.meta) y.push_back(m.label);
  const auto direct = gbt::fit_gbt(fs.X, y, cfg.pipeline.gbt);
  CHECK(j == gbt::to_json(direct));
}

TEST_CASE("dae with zero epochs returns the initial parameters") {
  testsupport::TempDir dir("dae");
  const auto features = tiny_features(dir);
  write_file(dir / "c.ini", kSmallConfig);
  REQUIRE(call({"train", "--stage", "dae", "--epochs", "0", "--config", (dir / "c.ini").string(),
                "--data", features.string(), "--out", (dir / "t").string()}) == 0);
  const auto m = neural::dae_from_json(read_json(dir.path / "t" / "model.json"));
  const auto cfg = cli::parse_config(kSmallConfig);
  const auto fs = dataprep::read_features(features);
  const auto init = neural::init_dae(static_cast<std::size_t>(fs.X.cols()), cfg.pipeline.arch,
                                     cfg.pipeline.dae.seed);
  CHECK((neural::denoise(m, fs.X) - neural::denoise(init, fs.X)).cwiseAbs().maxCoeff() == 0.0);

  CHECK(call({"explain", "--model", (dir / "t").string() + "/model.json", "--data", features.string(),
              "--out", (dir / "e").string()}) == 2);
  CHECK(call({"eval", "--model", (dir / "t").string() + "/model.json", "--data",
              (dir / "data.csv").string(), "--out", (dir / "e").string()}) == 2);
}

TEST_CASE("explain writes locally accurate values for a tree model") {
  testsupport::TempDir dir("explain");
  const auto features = tiny_features(dir);
  write_file(dir / "c.ini", kSmallConfig);
  REQUIRE(call({"train", "--stage", "gbt", "--config", (dir / "c.ini").string(), "--data",
                features.string(), "--out", (dir / "t").string()}) == 0);
  CHECK(call({"explain", "--model", (dir.path / "t" / "model.json").string(), "--data",
              features.string(), "--limit", "10", "--out", (dir / "e").string()}) == 0);
  CHECK(fs::exists(dir.path / "e" / "shap.csv"));
  CHECK(call({"explain", "--model", (dir.path / "t" / "model.json").string(), "--data",
              features.string(), "--method", "exact", "--out", (dir / "e").string()}) == 2);
}

TEST_CASE("output directory falls back to OUTPUT_DIR") {
  testsupport::TempDir dir("outdir");
  auto sc = testsupport::tiny_scenario();
  simcloud::export_dataset(simcloud::run_all(sc), dir / "data.csv");
  ::setenv("OUTPUT_DIR", (dir / "env").c_str(), 1);
  const int code = call({"prep", "--data", (dir / "data.csv").string()});
  ::unsetenv("OUTPUT_DIR");
  CHECK(code == 0);
  CHECK(fs::exists(dir.path / "env" / "features.csv"));
  CHECK(cli::resolve_output("flag", "fb") == fs::path("flag"));
  CHECK(cli::resolve_output("", "fb") == fs::path("fb"));
}

TEST_CASE("numerical failures exit with 3") {
  testsupport::TempDir dir("num");
  const auto features = tiny_features(dir);
  write_file(dir / "c.ini", "[dae]\nencoder = 8,4\nepochs = 5\nlr = 1e12\n");
  CHECK(call({"train", "--stage", "dae", "--config", (dir / "c.ini").string(), "--data",
              features.string(), "--out", (dir / "t").string()}) == 3);
}
