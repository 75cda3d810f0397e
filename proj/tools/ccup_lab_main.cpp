#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ccup/errors.hpp"
#include "ccup/scenario.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::string format = "csv";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> seeds;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_outputs) {
  cmd->add_option("--config", args.config_path, "scenario config (JSON)")->required();
  if (with_outputs) {
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--format", args.format, "trace format")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--seed", args.seed, "override the config seed");
    cmd->add_option("--seeds", args.seeds, "override with a seed range A..B");
  }
}

ccup::RunOptions make_options(const CommonArgs& args) {
  ccup::RunOptions opts;
  opts.out_dir = args.out_dir;
  opts.format = args.format;
  opts.seed_override = args.seed;
  if (args.seeds) {
    const auto sep = args.seeds->find("..");
    if (sep == std::string::npos) {
      throw ccup::ConfigError("--seeds expects a range of the form A..B");
    }
    const std::uint64_t lo = std::stoull(args.seeds->substr(0, sep));
    const std::uint64_t hi = std::stoull(args.seeds->substr(sep + 2));
    if (hi < lo) throw ccup::ConfigError("--seeds range is empty");
    opts.seed_range_override = {lo, hi};
  }
  return opts;
}

int run_command(const CommonArgs& args, const char* expected_kind) {
  const nlohmann::json config = ccup::load_config(args.config_path);
  if (expected_kind && (!config.contains("kind") || config.at("kind") != expected_kind)) {
    std::fprintf(stderr, "error: config kind must be '%s'\n", expected_kind);
    return 1;
  }
  return ccup::run_scenario(config, make_options(args));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ccup-lab: discrete context-content inference scenarios"};
  app.require_subcommand(1);

  CommonArgs run_args, validate_args, ib_args, ot_args;
  CLI::App* run = app.add_subcommand("run", "run a scenario config");
  add_common(run, run_args, true);
  CLI::App* validate = app.add_subcommand("validate", "check a config without running it");
  add_common(validate, validate_args, false);
  CLI::App* ib = app.add_subcommand("ib-curve", "sweep the bottleneck trade-off curve");
  add_common(ib, ib_args, true);
  CLI::App* ot = app.add_subcommand("ot-check", "compare regularized and exact transport");
  add_common(ot, ot_args, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) {
      const nlohmann::json config = ccup::load_config(validate_args.config_path);
      const ccup::ValidationReport report = ccup::validate_config(config);
      if (report.ok()) {
        std::printf("ok\n");
        return 0;
      }
      for (const auto& e : report.errors) std::fprintf(stderr, "error: %s\n", e.c_str());
      return 1;
    }
    if (run->parsed()) return run_command(run_args, nullptr);
    if (ib->parsed()) return run_command(ib_args, "ib_curve");
    return run_command(ot_args, "ot_check");
  } catch (const ccup::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
