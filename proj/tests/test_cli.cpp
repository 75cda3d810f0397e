#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ccup/errors.hpp"
#include "ccup/scenario.hpp"

namespace fs = std::filesystem;

namespace {

std::string bin_path() {
  const char* env = std::getenv("CCUP_LAB_BIN");
  REQUIRE(env != nullptr);
  return env;
}

std::string configs_dir() {
  const char* env = std::getenv("CCUP_LAB_CONFIGS");
  REQUIRE(env != nullptr);
  return env;
}

int run_cli(const std::string& args) {
  const std::string cmd = bin_path() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ccup_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("validate accepts every shipped config") {
  for (const auto& entry : fs::directory_iterator(configs_dir())) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    CHECK(run_cli("validate --config " + entry.path().string()) == 0);
  }
}

TEST_CASE("validation collects every violation") {
  const fs::path dir = fresh_dir("invalid");
  SUBCASE("missing lambda names the field and kind") {
    const fs::path cfg = dir / "missing_lambda.json";
    std::ofstream(cfg) << R"({"schema_version":1,"kind":"temporal","seed":1,)"
                       << R"("labels":["s0","s1"],"entropies":[0.1,0.2],"max_t":10})";
    const nlohmann::json config = ccup::load_config(cfg.string());
    const ccup::ValidationReport report = ccup::validate_config(config);
    REQUIRE(report.errors.size() == 1);
    CHECK(report.errors[0].find("lambda") != std::string::npos);
    CHECK(report.errors[0].find("temporal") != std::string::npos);
    CHECK(run_cli("validate --config " + cfg.string()) == 1);
  }
  SUBCASE("dimension mismatch cites both declared sizes") {
    const fs::path cfg = dir / "mismatch.json";
    std::ofstream(cfg) << R"({"schema_version":1,"kind":"inverted","seed":1,)"
                       << R"("candidates":["c0","c1","c2"],"psi_labels":["p0","p1"],)"
                       << R"("kernel":[[0.5,0.5],[0.5,0.5]],"lambda":0.5,)"
                       << R"("regularizer":"kl","start":"c0","max_t":10})";
    const ccup::ValidationReport report =
        ccup::validate_config(ccup::load_config(cfg.string()));
    REQUIRE(report.errors.size() == 1);
    CHECK(report.errors[0].find("3") != std::string::npos);
    CHECK(report.errors[0].find("2") != std::string::npos);
  }
  SUBCASE("multiple violations are all reported") {
    const fs::path cfg = dir / "many.json";
    std::ofstream(cfg) << R"({"schema_version":1,"kind":"temporal",)"
                       << R"("labels":["s0"],"entropies":[0.1,0.2]})";
    const ccup::ValidationReport report =
        ccup::validate_config(ccup::load_config(cfg.string()));
    CHECK(report.errors.size() >= 3);  // seed, lambda, max_t, size mismatch
  }
  SUBCASE("parse errors carry a line number") {
    const fs::path cfg = dir / "broken.json";
    std::ofstream(cfg) << "{\n  \"kind\": \"temporal\",\n  oops\n}\n";
    CHECK_THROWS_WITH_AS(ccup::load_config(cfg.string()),
                         doctest::Contains(":3:"), ccup::ConfigError);
  }
}

TEST_CASE("exit codes follow the verdict") {
  const fs::path dir = fresh_dir("verdicts");
  const std::string configs = configs_dir();
  CHECK(run_cli("run --config " + configs + "/oscillator_contraction.json --out " +
                (dir / "c").string()) == 0);
  CHECK(run_cli("run --config " + configs + "/oscillator_tremor.json --out " +
                (dir / "t").string()) == 2);
  CHECK(run_cli("run --config " + configs + "/temporal_delta.json --out " +
                (dir / "d").string()) == 0);
  CHECK(run_cli("run --config /nonexistent.json --out " + (dir / "x").string()) == 1);

  // The tremor trace records the detected period in its verdict row.
  const std::string trace = slurp(dir / "t" / "trace.csv");
  CHECK(trace.find("limit_cycle(period=") != std::string::npos);
}

TEST_CASE("identical config and seed replay byte-identically") {
  const std::string configs = configs_dir();
  for (const std::string name :
       {std::string("temporal_delta"), std::string("inverted_fixed_point"),
        std::string("ot_check_3x3")}) {
    const fs::path a = fresh_dir(name + "_a"), b = fresh_dir(name + "_b");
    REQUIRE(run_cli("run --config " + configs + "/" + name + ".json --out " + a.string()) ==
            run_cli("run --config " + configs + "/" + name + ".json --out " + b.string()));
    for (const auto& entry : fs::directory_iterator(a)) {
      CAPTURE(entry.path().string());
      CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
    }
  }
}

TEST_CASE("manifest echoes the config") {
  const fs::path dir = fresh_dir("manifest");
  const std::string configs = configs_dir();
  REQUIRE(run_cli("run --config " + configs + "/temporal_delta.json --out " +
                  dir.string()) == 0);
  const nlohmann::json manifest =
      nlohmann::json::parse(slurp(dir / "manifest.json"));
  const nlohmann::json config = ccup::load_config(configs + "/temporal_delta.json");
  CHECK(manifest.at("config") == config);
  CHECK(manifest.at("library_version").get<std::string>() == ccup::kLibraryVersion);
  CHECK(manifest.contains("verdict"));
}

TEST_CASE("json format emits a parseable trace") {
  const fs::path dir = fresh_dir("jsonfmt");
  REQUIRE(run_cli("run --config " + configs_dir() +
                  "/temporal_delta.json --format json --out " + dir.string()) == 0);
  const nlohmann::json trace = nlohmann::json::parse(slurp(dir / "trace.json"));
  CHECK(trace.contains("steps"));
  CHECK(trace.at("verdict").get<std::string>().find("converged") == 0);
}

TEST_CASE("seed override fans out into per-seed directories") {
  const fs::path dir = fresh_dir("fanout");
  REQUIRE(run_cli("run --config " + configs_dir() +
                  "/temporal_delta.json --seeds 1..3 --out " + dir.string()) == 0);
  for (int seed = 1; seed <= 3; ++seed) {
    CHECK(fs::exists(dir / ("seed_" + std::to_string(seed)) / "trace.csv"));
  }
}
