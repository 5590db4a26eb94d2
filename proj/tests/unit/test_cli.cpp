#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using dmarch::cli::run;

namespace {

fs::path dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "dmarch_test_cli" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string write_config(const fs::path& d, const std::string& body) {
  const fs::path p = d / "config.in.json";
  std::ofstream(p) << body;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("unknown subcommand and missing subcommand exit 2") {
  CHECK(run({"frobnicate"}) == 2);
  CHECK(run(std::vector<std::string>{}) == 2);
}

TEST_CASE("config errors name the failing key and exit 2") {
  const fs::path d = dir("bad");
  CHECK(run({"sweep", "--config", write_config(d, R"({"schema_version": 1, "stepz": 3})")}) == 2);
  CHECK(run({"sweep", "--config", write_config(d, R"({"schema_version": 2})")}) == 2);
  CHECK(run({"sweep", "--config", write_config(d, R"({"schema_version": 1, "eta": "big"})")}) == 2);
  CHECK(run({"train", "--config", write_config(d, R"({"schema_version": 1, "field": {"widths": [4]}})")}) == 2);
  CHECK(run({"sweep", "--config", (d / "nope.json").string()}) == 2);
  CHECK(run({"sample", "--out", (d / "s").string()}) == 2);  // no model
}

TEST_CASE("verify passes, writes a manifest and is reproducible") {
  const fs::path a = dir("verify_a"), b = dir("verify_b");
  REQUIRE(run({"verify", "--out", a.string()}) == 0);
  REQUIRE(run({"verify", "--out", b.string()}) == 0);
  CHECK(slurp(a / "verify.csv") == slurp(b / "verify.csv"));
  const auto m = nlohmann::json::parse(slurp(a / "manifest.json"));
  CHECK(m["command"] == "verify");
  CHECK(m["seed"] == 7);
  CHECK(m.contains("config_hash"));
  CHECK(m.contains("versions"));
  std::size_t rows = 0;
  std::istringstream in(slurp(a / "verify.csv"));
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows - 1 >= 25);
}

TEST_CASE("train, sample, metrics end to end on a tiny budget") {
  const fs::path d = dir("pipeline");
  const std::string train_cfg = write_config(d, R"({
    "schema_version": 1, "seed": 2,
    "target": {"kind": "two_moons", "n": 128},
    "source": {"kind": "eight_gaussians"},
    "field": {"hidden_widths": [16, 16]},
    "epochs": 3, "batch_size": 64, "coupling": "minibatch_closest_to_interpolant"})");
  REQUIRE(run({"train", "--config", train_cfg, "--out", (d / "train").string()}) == 0);
  CHECK(fs::exists(d / "train" / "model.json"));
  CHECK(fs::exists(d / "train" / "manifest.json"));
  const std::string model = (d / "train" / "model.json").string();
  const fs::path sample_cfg = d / "sample.json";
  std::ofstream(sample_cfg) << R"({"schema_version": 1, "init": {"source": {"kind": "eight_gaussians"}, "n": 300}})";
  const fs::path metrics_cfg = d / "metrics.json";
  std::ofstream(metrics_cfg) << R"({"schema_version": 1, "b": {"kind": "two_moons", "n": 300}})";
  REQUIRE(run({"sample", "--config", sample_cfg.string(), "--model", model, "--out", (d / "sample").string(), "--kind",
               "sphere_tracing", "--then-hmc", "--deterministic-svg", "--seed", "4"}) == 0);
  CHECK(fs::exists(d / "sample" / "samples.csv"));
  CHECK(fs::exists(d / "sample" / "samples.svg"));
  REQUIRE(run({"metrics", "--config", metrics_cfg.string(), "--samples", (d / "sample" / "samples.csv").string(), "--out",
               (d / "metrics").string()}) == 0);
  CHECK(slurp(d / "metrics" / "metrics.csv").rfind("metric,value,method,n_a,n_b\n", 0) == 0);
  REQUIRE(run({"plot", "--model", model, "--out", (d / "plot").string(), "--deterministic-svg"}) == 0);
  CHECK(fs::exists(d / "plot" / "levelset.svg"));

  REQUIRE(run({"sample", "--config", sample_cfg.string(), "--model", model, "--out", (d / "sample2").string(), "--kind",
               "sphere_tracing", "--then-hmc", "--deterministic-svg", "--seed", "4"}) == 0);
  CHECK(slurp(d / "sample" / "samples.csv") == slurp(d / "sample2" / "samples.csv"));
  CHECK(slurp(d / "sample" / "samples.svg") == slurp(d / "sample2" / "samples.svg"));
}

TEST_CASE("oracle and coverage commands write their outputs") {
  const fs::path d = dir("oracle");
  REQUIRE(run({"oracle", "--out", (d / "o").string(), "--deterministic-svg"}) == 0);
  CHECK(fs::exists(d / "o" / "oracle.csv"));
  CHECK(fs::exists(d / "o" / "oracle.svg"));
  const std::string cov = write_config(d, R"({"schema_version": 1,
    "dataset": {"kind": "hubness", "n": 64, "dim": 16}, "n_per_bin": 64, "n_bins": 4,
    "coupling_check": {"batch": 32, "n_batches": 2}})");
  REQUIRE(run({"coverage", "--config", cov, "--out", (d / "c").string(), "--deterministic-svg"}) == 0);
  CHECK(fs::exists(d / "c" / "coverage.csv"));
  CHECK(fs::exists(d / "c" / "coupling.csv"));
}
