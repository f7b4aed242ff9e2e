#include "cli/runconfig.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "saup/error.hpp"
#include "saup/hash.hpp"
#include "saup/masks.hpp"

namespace saup::cli {

namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

void reject_unknown(const json& j, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ConfigError(where + "." + key + ": unknown key");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

void parse_dataset(const json& j, DatasetSection& out) {
  require_object(j, "dataset");
  reject_unknown(j, "dataset",
                 {"kind", "classes", "per_class", "height", "width",
                  "words_per_target", "seed", "prompt", "pool_classes",
                  "pool_per_class", "manifest"});
  read(j, "kind", out.kind, "dataset");
  read(j, "classes", out.classes, "dataset");
  read(j, "per_class", out.per_class, "dataset");
  read(j, "height", out.height, "dataset");
  read(j, "width", out.width, "dataset");
  read(j, "words_per_target", out.words_per_target, "dataset");
  read(j, "seed", out.seed, "dataset");
  read(j, "prompt", out.prompt, "dataset");
  read(j, "pool_classes", out.pool_classes, "dataset");
  read(j, "pool_per_class", out.pool_per_class, "dataset");
  read(j, "manifest", out.manifest, "dataset");
}

void parse_model(const json& j, ModelSection& out) {
  require_object(j, "model");
  reject_unknown(j, "model", {"weights", "grounding_epochs", "grounding_lr"});
  read(j, "weights", out.weights, "model");
  read(j, "grounding_epochs", out.grounding.epochs, "model");
  read(j, "grounding_lr", out.grounding.learning_rate, "model");
}

void parse_attack(const json& j, AttackConfig& out) {
  require_object(j, "attack");
  reject_unknown(j, "attack",
                 {"epochs", "learning_rate", "momentum", "seed", "space",
                  "batch", "normalize_gradient", "per_example_trace", "mask",
                  "loss"});
  read(j, "epochs", out.epochs, "attack");
  read(j, "learning_rate", out.learning_rate, "attack");
  read(j, "momentum", out.momentum, "attack");
  read(j, "seed", out.seed, "attack");
  read(j, "batch", out.batch, "attack");
  read(j, "normalize_gradient", out.normalize_gradient, "attack");
  read(j, "per_example_trace", out.per_example_trace, "attack");
  if (j.contains("space")) {
    out.space = space_from_string(j.at("space").get<std::string>());
  }
  if (j.contains("mask")) {
    const json& m = j.at("mask");
    require_object(m, "attack.mask");
    reject_unknown(m, "attack.mask", {"shape", "reference_width"});
    if (m.contains("shape")) {
      out.mask.shape = mask_shape_from_string(m.at("shape").get<std::string>());
    }
    read(m, "reference_width", out.mask.reference_width, "attack.mask");
  }
  if (j.contains("loss")) {
    const json& l = j.at("loss");
    require_object(l, "attack.loss");
    reject_unknown(l, "attack.loss", {"lambda", "margin", "length_normalize"});
    read(l, "lambda", out.loss.lambda, "attack.loss");
    read(l, "margin", out.loss.margin, "attack.loss");
    read(l, "length_normalize", out.loss.length_normalize, "attack.loss");
  }
}

void parse_eval(const json& j, EvalSection& out) {
  require_object(j, "eval");
  reject_unknown(j, "eval", {"split", "prompts_file"});
  read(j, "split", out.split, "eval");
  read(j, "prompts_file", out.prompts_file, "eval");
}

void parse_analysis(const json& j, AnalysisSection& out) {
  require_object(j, "analysis");
  reject_unknown(j, "analysis", {"split"});
  read(j, "split", out.split, "analysis");
}

void check_split_name(const std::string& split, const std::string& where) {
  if (split != "train" && split != "test") {
    throw ConfigError(where + ": expected 'train' or 'test', got '" + split +
                      "'");
  }
}

}  // namespace

void RunConfig::validate() const {
  if (dataset.kind != "synthetic" && dataset.kind != "imagenet" &&
      dataset.kind != "rist") {
    throw ConfigError("dataset.kind: expected synthetic, imagenet or rist, "
                      "got '" + dataset.kind + "'");
  }
  if (dataset.classes < 1) throw ConfigError("dataset.classes: must be >= 1");
  if (dataset.per_class < 2)
    throw ConfigError("dataset.per_class: must be >= 2 (train + test)");
  if (dataset.height < 1 || dataset.width < 1)
    throw ConfigError("dataset.height/width: must be positive");
  if (dataset.words_per_target < 1)
    throw ConfigError("dataset.words_per_target: must be >= 1");
  if (dataset.pool_classes < 1)
    throw ConfigError("dataset.pool_classes: must be >= 1");
  if (dataset.pool_per_class < 2)
    throw ConfigError("dataset.pool_per_class: must be >= 2");
  model.grounding.validate();
  attack.validate();
  check_split_name(eval.split, "eval.split");
  check_split_name(analysis.split, "analysis.split");
}

std::string RunConfig::canonical_json() const {
  json j;
  j["dataset"] = {{"kind", dataset.kind},
                  {"classes", dataset.classes},
                  {"per_class", dataset.per_class},
                  {"height", dataset.height},
                  {"width", dataset.width},
                  {"words_per_target", dataset.words_per_target},
                  {"seed", dataset.seed},
                  {"prompt", dataset.prompt},
                  {"pool_classes", dataset.pool_classes},
                  {"pool_per_class", dataset.pool_per_class},
                  {"manifest", dataset.manifest}};
  j["model"] = {{"weights", model.weights},
                {"grounding_epochs", model.grounding.epochs},
                {"grounding_lr", model.grounding.learning_rate}};
  j["attack"] = {{"epochs", attack.epochs},
                 {"learning_rate", attack.learning_rate},
                 {"momentum", attack.momentum},
                 {"seed", attack.seed},
                 {"space", to_string(attack.space)},
                 {"batch", attack.batch},
                 {"normalize_gradient", attack.normalize_gradient},
                 {"per_example_trace", attack.per_example_trace},
                 {"mask",
                  {{"shape", to_string(attack.mask.shape)},
                   {"reference_width", attack.mask.reference_width}}},
                 {"loss",
                  {{"lambda", attack.loss.lambda},
                   {"margin", attack.loss.margin},
                   {"length_normalize", attack.loss.length_normalize}}}};
  j["eval"] = {{"split", eval.split}, {"prompts_file", eval.prompts_file}};
  j["analysis"] = {{"split", analysis.split}};
  return j.dump();  // nlohmann objects iterate in sorted key order
}

std::string RunConfig::hash() const { return to_hex(fnv1a64(canonical_json())); }

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();

  json j;
  try {
    j = json::parse(buffer.str());
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  require_object(j, "config");
  reject_unknown(j, "config",
                 {"dataset", "model", "attack", "eval", "analysis",
                  "output_dir"});

  RunConfig cfg;
  if (j.contains("dataset")) parse_dataset(j.at("dataset"), cfg.dataset);
  if (j.contains("model")) parse_model(j.at("model"), cfg.model);
  if (j.contains("attack")) parse_attack(j.at("attack"), cfg.attack);
  if (j.contains("eval")) parse_eval(j.at("eval"), cfg.eval);
  if (j.contains("analysis")) parse_analysis(j.at("analysis"), cfg.analysis);
  read(j, "output_dir", cfg.output_dir, "config");
  return cfg;
}

}  // namespace saup::cli
