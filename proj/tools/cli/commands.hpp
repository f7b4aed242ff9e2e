#ifndef SAUP_CLI_COMMANDS_HPP
#define SAUP_CLI_COMMANDS_HPP

#include <string>
#include <vector>

#include "cli/runconfig.hpp"
#include "saup/datakit.hpp"

namespace saup::cli {

struct SweepOptions {
  std::string axis = "targets";
  std::vector<std::string> values;  // one per sweep point
  int workers = 1;
};

// Validates the axis name, value syntax, and worker count (usage errors ->
// ConfigError). An empty values list selects the axis's default grid.
SweepOptions parse_sweep_options(const std::string& axis,
                                 const std::string& values_csv, int workers);

// The dataset the config describes (synthetic, imagenet-protocol sample, or
// trajectory manifest).
AttackDataset build_dataset(const RunConfig& cfg);

// Commands print a short summary to stdout and write their files under
// cfg.output_dir. They report failure by throwing; the dispatcher maps
// exceptions to exit codes.
void cmd_dataset(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg, const std::string& artifact_path);
void cmd_sweep(const RunConfig& cfg, const SweepOptions& opts);
void cmd_analyze(const RunConfig& cfg, const std::string& artifact_path);

}  // namespace saup::cli

#endif  // SAUP_CLI_COMMANDS_HPP
