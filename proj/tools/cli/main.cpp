#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cli/commands.hpp"
#include "cli/runconfig.hpp"
#include "saup/masks.hpp"
#include "saup/sort.hpp"

// Exit codes: 0 success, 1 usage/config error, 2 runtime failure.
int main(int argc, char** argv) {
  using saup::cli::RunConfig;

  CLI::App app{"universal perturbation toolkit: synthesize a single masked "
               "perturbation that steers a captioner to per-class targets"};
  app.require_subcommand(1);

  const RunConfig defaults;
  std::string config_path;
  std::string out_dir;

  std::string dataset_kind = defaults.dataset.kind;
  int classes = defaults.dataset.classes;
  int per_class = defaults.dataset.per_class;
  int image_size = defaults.dataset.height;
  int words_per_target = defaults.dataset.words_per_target;
  uint64_t dataset_seed = defaults.dataset.seed;
  std::string prompt = defaults.dataset.prompt;
  int pool_classes = defaults.dataset.pool_classes;
  int pool_per_class = defaults.dataset.pool_per_class;
  std::string manifest;

  std::string model_weights;
  int grounding_epochs = defaults.model.grounding.epochs;
  double grounding_lr = defaults.model.grounding.learning_rate;

  int epochs = defaults.attack.epochs;
  double lr = defaults.attack.learning_rate;
  double momentum = defaults.attack.momentum;
  double lambda = defaults.attack.loss.lambda;
  double margin = defaults.attack.loss.margin;
  bool length_normalize = false;
  uint64_t seed = defaults.attack.seed;
  std::string mask_shape = to_string(defaults.attack.mask.shape);
  int mask_width = defaults.attack.mask.reference_width;
  std::string space = to_string(defaults.attack.space);
  int batch = defaults.attack.batch;
  bool per_example_trace = false;

  std::string split;
  std::string prompts_file;
  std::string artifact_path;
  std::string axis = "targets";
  std::string values_csv;
  int workers = 1;

  auto* o_config =
      app.add_option("--config", config_path, "JSON run-config file");
  auto* o_out = app.add_option(
      "--out", out_dir,
      "output root (default: config output_dir, $SAUP_OUTPUT_ROOT, saup_out)");

  auto* o_kind = app.add_option("--dataset-kind", dataset_kind,
                                "synthetic | imagenet | rist")
                     ->capture_default_str();
  auto* o_classes =
      app.add_option("--classes", classes, "number of attacked classes")
          ->capture_default_str();
  auto* o_per_class =
      app.add_option("--per-class", per_class,
                     "synthetic images per class (5/7 train, 2/7 test)")
          ->capture_default_str();
  auto* o_image_size =
      app.add_option("--image-size", image_size, "square image side")
          ->capture_default_str();
  auto* o_words = app.add_option("--words-per-target", words_per_target,
                                 "words in each synthetic target")
                      ->capture_default_str();
  auto* o_dseed = app.add_option("--dataset-seed", dataset_seed,
                                 "dataset generation seed")
                      ->capture_default_str();
  auto* o_prompt =
      app.add_option("--prompt", prompt, "prompt text")->capture_default_str();
  auto* o_pool_classes =
      app.add_option("--pool-classes", pool_classes,
                     "imagenet: classes in the sampling pool")
          ->capture_default_str();
  auto* o_pool_per_class =
      app.add_option("--pool-per-class", pool_per_class,
                     "imagenet: images per pool class")
          ->capture_default_str();
  auto* o_manifest =
      app.add_option("--manifest", manifest, "rist: trajectory manifest path");

  auto* o_weights = app.add_option("--model-weights", model_weights,
                                   "weight blob (default: pretrain fresh)");
  auto* o_gepochs = app.add_option("--grounding-epochs", grounding_epochs,
                                   "pretraining epochs")
                        ->capture_default_str();
  auto* o_glr =
      app.add_option("--grounding-lr", grounding_lr, "pretraining step size")
          ->capture_default_str();

  auto* o_epochs = app.add_option("--epochs", epochs, "attack epochs")
                       ->capture_default_str();
  auto* o_lr = app.add_option("--lr", lr, "attack step size")
                   ->capture_default_str();
  auto* o_momentum = app.add_option("--momentum", momentum, "momentum factor")
                         ->capture_default_str();
  auto* o_lambda =
      app.add_option("--lambda", lambda, "margin-loss weight (0 disables)")
          ->capture_default_str();
  auto* o_margin = app.add_option("--margin", margin, "margin m")
                       ->capture_default_str();
  auto* o_lennorm = app.add_flag("--length-normalize", length_normalize,
                                 "normalize sequence logprobs by length");
  auto* o_seed =
      app.add_option("--seed", seed, "attack seed (also seeds pretraining)")
          ->capture_default_str();
  auto* o_mask_shape =
      app.add_option("--mask-shape", mask_shape, "frame | corner")
          ->capture_default_str();
  auto* o_mask_width = app.add_option("--mask-width", mask_width,
                                      "mask width at the 300x300 reference")
                           ->capture_default_str();
  auto* o_space =
      app.add_option("--space", space,
                     "normalized | pixel (pixel = ablation arm)")
          ->capture_default_str();
  auto* o_batch = app.add_option("--batch", batch,
                                 "examples per velocity update")
                      ->capture_default_str();
  auto* o_petrace = app.add_flag("--per-example-trace", per_example_trace,
                                 "record one loss entry per example step");

  auto* o_split = app.add_option("--split", split, "train | test");
  auto* o_prompts = app.add_option("--prompts", prompts_file,
                                   "prompt file for eval, one per line");
  app.add_option("--artifact", artifact_path,
                 "artifact path (default: <output root>/artifact.json)");
  app.add_option("--axis", axis,
                 "sweep axis: targets | words_per_target | frame_width | "
                 "corner_size | train_size | ablation")
      ->capture_default_str();
  app.add_option("--values", values_csv,
                 "comma-separated sweep values (default grid depends on the "
                 "axis)");
  app.add_option("--workers", workers, "parallel sweep points")
      ->capture_default_str();

  CLI::App* c_dataset = app.add_subcommand(
      "dataset", "materialize the configured dataset (images + listing)");
  CLI::App* c_train = app.add_subcommand(
      "train", "optimize a universal perturbation and save the artifact");
  CLI::App* c_eval = app.add_subcommand(
      "eval", "evaluate a saved artifact: ASR report, tables, plots");
  CLI::App* c_sweep = app.add_subcommand(
      "sweep", "train + eval across one axis, aggregate a comparison report");
  CLI::App* c_analyze = app.add_subcommand(
      "analyze", "latent-space analysis of a saved artifact");
  for (CLI::App* sub : {c_dataset, c_train, c_eval, c_sweep, c_analyze}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  RunConfig cfg;
  saup::cli::SweepOptions sweep_opts;
  try {
    if (o_config->count()) cfg = saup::cli::load_run_config(config_path);
    if (const char* env = std::getenv("SAUP_OUTPUT_ROOT"); env && *env) {
      cfg.output_dir = env;
    }
    if (o_out->count()) cfg.output_dir = out_dir;
    if (cfg.output_dir.empty()) cfg.output_dir = "saup_out";

    if (o_kind->count()) cfg.dataset.kind = dataset_kind;
    if (o_classes->count()) cfg.dataset.classes = classes;
    if (o_per_class->count()) cfg.dataset.per_class = per_class;
    if (o_image_size->count()) {
      cfg.dataset.height = image_size;
      cfg.dataset.width = image_size;
    }
    if (o_words->count()) cfg.dataset.words_per_target = words_per_target;
    if (o_dseed->count()) cfg.dataset.seed = dataset_seed;
    if (o_prompt->count()) cfg.dataset.prompt = prompt;
    if (o_pool_classes->count()) cfg.dataset.pool_classes = pool_classes;
    if (o_pool_per_class->count()) cfg.dataset.pool_per_class = pool_per_class;
    if (o_manifest->count()) cfg.dataset.manifest = manifest;

    if (o_weights->count()) cfg.model.weights = model_weights;
    if (o_gepochs->count()) cfg.model.grounding.epochs = grounding_epochs;
    if (o_glr->count()) cfg.model.grounding.learning_rate = grounding_lr;

    if (o_epochs->count()) cfg.attack.epochs = epochs;
    if (o_lr->count()) cfg.attack.learning_rate = lr;
    if (o_momentum->count()) cfg.attack.momentum = momentum;
    if (o_lambda->count()) cfg.attack.loss.lambda = lambda;
    if (o_margin->count()) cfg.attack.loss.margin = margin;
    if (o_lennorm->count()) cfg.attack.loss.length_normalize = true;
    if (o_seed->count()) cfg.attack.seed = seed;
    if (o_mask_shape->count()) {
      cfg.attack.mask.shape = saup::mask_shape_from_string(mask_shape);
    }
    if (o_mask_width->count()) cfg.attack.mask.reference_width = mask_width;
    if (o_space->count()) cfg.attack.space = saup::space_from_string(space);
    if (o_batch->count()) cfg.attack.batch = batch;
    if (o_petrace->count()) cfg.attack.per_example_trace = true;

    if (o_split->count()) {
      cfg.eval.split = split;
      cfg.analysis.split = split;
    }
    if (o_prompts->count()) cfg.eval.prompts_file = prompts_file;

    cfg.validate();
    if (c_sweep->parsed()) {
      sweep_opts = saup::cli::parse_sweep_options(axis, values_csv, workers);
    }
  } catch (const std::exception& e) {
    std::cerr << "saup: " << e.what() << "\n";
    return 1;
  }

  try {
    if (c_dataset->parsed()) {
      saup::cli::cmd_dataset(cfg);
    } else if (c_train->parsed()) {
      saup::cli::cmd_train(cfg);
    } else if (c_eval->parsed()) {
      saup::cli::cmd_eval(cfg, artifact_path);
    } else if (c_sweep->parsed()) {
      saup::cli::cmd_sweep(cfg, sweep_opts);
    } else {
      saup::cli::cmd_analyze(cfg, artifact_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "saup: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
