#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace ccup {

struct ValidationReport {
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

// Full schema check without running; collects every violation.
ValidationReport validate_config(const nlohmann::json& config);

// Parses the file and reports parse errors with line numbers.
nlohmann::json load_config(const std::string& path);

struct RunOptions {
  std::string out_dir = ".";
  std::string format = "csv";  // csv | json
  std::optional<std::uint64_t> seed_override;
  std::optional<std::pair<std::uint64_t, std::uint64_t>> seed_range_override;
  int max_threads = 0;  // 0 = from CCUP_LAB_THREADS, else hardware
};

// Exit codes: 0 converged/solved/ok, 2 diverged/limit_cycle/unsolved,
// 1 config or runtime error (thrown as ConfigError / domain errors).
int run_scenario(const nlohmann::json& config, const RunOptions& options);

// Formats a double with 12 significant digits for trace replay diffs.
std::string format_double(double value);

extern const char* kLibraryVersion;

}  // namespace ccup
