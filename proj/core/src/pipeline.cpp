#include "saup/pipeline.hpp"

#include <chrono>
#include <cstddef>
#include <map>
#include <string>
#include <utility>

#include "saup/error.hpp"
#include "saup/tokenizer.hpp"

namespace saup {

namespace {

// Vocabulary ids 1..16 are the class words; targets live in a later slice.
constexpr int kClassWordCount = 16;

bool model_sized(const ImageTensor& image, const Captioner& model) {
  return image.height() == model.input_height() &&
         image.width() == model.input_width();
}

ImageTensor to_model_size(const ImageTensor& image, const Captioner& model) {
  if (model_sized(image, model)) return image;
  return resize_to_model(image, model.input_height(), model.input_width());
}

}  // namespace

void GroundingConfig::validate() const {
  if (epochs < 1) {
    throw ConfigError("grounding epochs must be >= 1, got " +
                      std::to_string(epochs));
  }
  if (!(learning_rate > 0.0)) {
    throw ConfigError("grounding learning rate must be positive, got " +
                      std::to_string(learning_rate));
  }
}

std::vector<int> class_caption(int class_id) {
  if (class_id < 0 || class_id >= kClassWordCount) {
    throw InputError("class id " + std::to_string(class_id) +
                     " has no class word (valid: 0.." +
                     std::to_string(kClassWordCount - 1) + ")");
  }
  return {1 + class_id, Tokenizer::kEosId};
}

ImageTensor paint_region(const ImageTensor& image, const Mask& mask) {
  if (!image.values.same_shape(mask.values)) {
    throw DimensionError("paint_region: image and mask shapes differ");
  }
  ImageTensor out = image;
  const size_t plane =
      static_cast<size_t>(out.values.height) * out.values.width;
  for (size_t i = 0; i < out.values.data.size(); ++i) {
    if (mask.values.data[i] == 0.0) continue;
    const int c = static_cast<int>(i / plane);
    out.values.data[i] = (c == 1) ? 0.0 : 1.0;
  }
  return out;
}

AttackDataset resize_for_model(const AttackDataset& dataset,
                               const Captioner& model) {
  AttackDataset out = dataset;
  for (DatasetEntry& entry : out.entries) {
    entry.image = to_model_size(entry.image, model);
  }
  return out;
}

std::vector<SupervisedExample> build_pretraining_examples(
    const AttackDataset& dataset, const Captioner& model,
    const MaskSpec& mask_spec) {
  dataset.validate(/*require_test=*/false);
  const NormalizationSpec& norm = model.normalization();
  const Mask mask = make_mask(mask_spec, model.input_channels(),
                              model.input_height(), model.input_width());
  const std::map<int, std::vector<int>> targets =
      dataset.tokenized_targets(model.eos_id());
  const std::vector<const DatasetEntry*> train =
      dataset.split_entries(Split::kTrain);

  std::vector<SupervisedExample> out;
  out.reserve(2 * train.size());
  for (const DatasetEntry* entry : train) {
    SupervisedExample ex;
    ex.image = normalize(to_model_size(entry->image, model), norm);
    ex.prompt = tokenizer().encode(entry->prompt);
    ex.caption = class_caption(entry->class_id);
    out.push_back(std::move(ex));
  }
  for (const DatasetEntry* entry : train) {
    SupervisedExample ex;
    ex.image =
        normalize(paint_region(to_model_size(entry->image, model), mask), norm);
    ex.prompt = tokenizer().encode(entry->prompt);
    ex.caption = targets.at(entry->class_id);
    out.push_back(std::move(ex));
  }
  return out;
}

ToyCaptioner make_grounded_captioner(const AttackDataset& dataset,
                                     const MaskSpec& mask_spec,
                                     const GroundingConfig& cfg,
                                     uint64_t seed) {
  cfg.validate();
  mask_spec.validate();
  ToyCaptioner model(seed);
  const std::vector<SupervisedExample> examples =
      build_pretraining_examples(dataset, model, mask_spec);
  PretrainConfig pretrain;
  pretrain.epochs = cfg.epochs;
  pretrain.learning_rate = cfg.learning_rate;
  pretrain.seed = seed;
  model.pretrain(examples, pretrain);
  return model;
}

double clean_caption_accuracy(const Captioner& model,
                              const AttackDataset& dataset, Split split) {
  const std::vector<const DatasetEntry*> entries = dataset.split_entries(split);
  if (entries.empty()) {
    throw InputError("clean_caption_accuracy: split " + to_string(split) +
                     " is empty");
  }
  // Class captions are one word + eos; decode budget follows the
  // longest-target + 2 evaluation rule.
  const int budget = 1 + 2;
  int hits = 0;
  for (const DatasetEntry* entry : entries) {
    const NormalizedTensor z =
        normalize(to_model_size(entry->image, model), model.normalization());
    const std::vector<int> pred =
        model.greedy_decode(z, tokenizer().encode(entry->prompt), budget);
    if (exact_match(pred, class_caption(entry->class_id), model.eos_id())) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(entries.size());
}

BenchmarkResult run_attack(const AttackDataset& dataset, ToyCaptioner model,
                           const AttackConfig& attack) {
  attack.validate();
  bool sized = true;
  for (const DatasetEntry& entry : dataset.entries) {
    if (!model_sized(entry.image, model)) {
      sized = false;
      break;
    }
  }
  AttackDataset resized;
  if (!sized) resized = resize_for_model(dataset, model);
  const AttackDataset& work = sized ? dataset : resized;

  BenchmarkResult result{std::move(model), {}, {}, {}, 0.0, 0.0, 0.0};
  result.clean_train_accuracy =
      clean_caption_accuracy(result.model, work, Split::kTrain);
  result.clean_test_accuracy =
      clean_caption_accuracy(result.model, work, Split::kTest);

  const auto start = std::chrono::steady_clock::now();
  result.artifact = optimize(work, result.model, attack);
  result.optimize_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();

  result.artifact.model_weights_hash = result.model.weights_hash();
  result.train_report =
      evaluate(result.artifact, work, result.model, {}, Split::kTrain);
  result.artifact.recorded_train_asr = result.train_report.overall_asr;
  result.test_report =
      evaluate(result.artifact, work, result.model, {}, Split::kTest);
  return result;
}

BenchmarkResult run_toy_benchmark(const AttackDataset& dataset,
                                  const AttackConfig& attack,
                                  const GroundingConfig& grounding) {
  dataset.validate();
  attack.validate();
  ToyCaptioner model =
      make_grounded_captioner(dataset, attack.mask, grounding, attack.seed);
  return run_attack(dataset, std::move(model), attack);
}

}  // namespace saup
