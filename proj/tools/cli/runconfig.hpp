#ifndef SAUP_CLI_RUNCONFIG_HPP
#define SAUP_CLI_RUNCONFIG_HPP

#include <cstdint>
#include <string>

#include "saup/pipeline.hpp"
#include "saup/sort.hpp"

namespace saup::cli {

// One JSON config file drives every command; sections a command does not
// use are ignored by it but still validated. Precedence, lowest to highest:
// built-in defaults < config file < SAUP_OUTPUT_ROOT (output root only)
// < command-line flags.

struct DatasetSection {
  std::string kind = "synthetic";  // synthetic | imagenet | rist
  int classes = 2;
  int per_class = 28;  // protocol split: 20 train / 8 test
  int height = 32;
  int width = 32;
  int words_per_target = 1;
  uint64_t seed = 0;
  std::string prompt = "describe this image";
  int pool_classes = 8;      // imagenet: synthetic stand-in pool size
  int pool_per_class = 70;   // imagenet: images per pool class (50 + 20)
  std::string manifest;      // rist: manifest path
};

struct ModelSection {
  std::string weights;  // weight-blob path; empty = grounded pretraining
  GroundingConfig grounding;
};

struct EvalSection {
  std::string split = "test";  // train | test
  std::string prompts_file;    // one prompt per line; empty = dataset prompt
};

struct AnalysisSection {
  std::string split = "train";
};

struct RunConfig {
  DatasetSection dataset;
  ModelSection model;
  AttackConfig attack;  // attack.seed also seeds model init + pretraining
  EvalSection eval;
  AnalysisSection analysis;
  std::string output_dir;  // output root; empty = env var or "saup_out"

  void validate() const;  // throws ConfigError on any bad field

  // Every field except output_dir, fixed nesting, sorted keys. Two configs
  // that differ only in key order or file location hash identically.
  std::string canonical_json() const;
  std::string hash() const;  // 16 hex digits of fnv1a64(canonical_json())
};

// Parses a config file. Unknown keys anywhere raise ConfigError naming the
// offending path; absent keys keep their defaults.
RunConfig load_run_config(const std::string& path);

}  // namespace saup::cli

#endif  // SAUP_CLI_RUNCONFIG_HPP
