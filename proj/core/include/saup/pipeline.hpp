#ifndef SAUP_PIPELINE_HPP
#define SAUP_PIPELINE_HPP

#include <cstdint>
#include <vector>

#include "saup/captioner.hpp"
#include "saup/datakit.hpp"
#include "saup/evalkit.hpp"
#include "saup/masks.hpp"
#include "saup/sort.hpp"

namespace saup {

// Orchestration for the built-in attack benchmark: dataset-agnostic
// pretraining of the toy captioner, attack optimization, and evaluation,
// with one seed driving every stochastic choice.
//
// Pretraining protocol. Two supervised tasks share the weights:
//   1. every train-split image, captioned with its class word
//      (vocabulary id 1 + class id);
//   2. a copy of each with the admissible perturbation region painted a
//      fixed off-palette color, captioned with the class's target string.
// Task 1 makes clean captions sensible. Task 2 grounds every target word as
// a reachable, region-conditioned output: a perturbation confined to the
// admissible region has an optimum that works for all classes at once,
// while the image interior still decides WHICH target is emitted. The
// optimizer is given none of this — it starts from a random perturbation
// and must recover the region content by gradient descent alone.

struct GroundingConfig {
  int epochs = 10;
  double learning_rate = 0.05;

  void validate() const;  // epochs >= 1, learning_rate > 0
};

// Clean caption for a class: {class word id, eos}. Valid for class ids
// 0..15 (the vocabulary's class-word slice); throws InputError beyond.
std::vector<int> class_caption(int class_id);

// Copy of the image with every masked pixel painted the grounding color:
// channel 1 becomes 0, every other channel 1. The color sits outside the
// synthetic palette (saturation there never reaches the channel extremes),
// so painting never collides with clean class appearance.
ImageTensor paint_region(const ImageTensor& image, const Mask& mask);

// Copy of the dataset with every entry resized to the model's input size
// (entries already at size are copied bit-identically).
AttackDataset resize_for_model(const AttackDataset& dataset,
                               const Captioner& model);

// The supervised set for the protocol above, in deterministic order: all
// class-caption examples (train-split order), then all painted
// target-caption examples (same order). Entries are resized to the model
// input size as needed; the mask is built at that size.
std::vector<SupervisedExample> build_pretraining_examples(
    const AttackDataset& dataset, const Captioner& model,
    const MaskSpec& mask_spec);

// Fresh ToyCaptioner(seed) pretrained with the grounding protocol; `seed`
// also drives the pretraining shuffle.
ToyCaptioner make_grounded_captioner(const AttackDataset& dataset,
                                     const MaskSpec& mask_spec,
                                     const GroundingConfig& cfg,
                                     uint64_t seed);

// Fraction of split entries whose clean greedy decode equals their class
// caption exactly.
double clean_caption_accuracy(const Captioner& model,
                              const AttackDataset& dataset, Split split);

struct BenchmarkResult {
  ToyCaptioner model;
  PerturbationArtifact artifact;  // recorded train ASR and weights hash set
  EvalReport train_report;
  EvalReport test_report;
  double clean_train_accuracy = 0.0;
  double clean_test_accuracy = 0.0;
  double optimize_seconds = 0.0;
};

// optimize + evaluate on both splits with the given model. Fills the
// artifact's model weights hash and recorded train ASR. The dataset must
// have a test split.
BenchmarkResult run_attack(const AttackDataset& dataset, ToyCaptioner model,
                           const AttackConfig& attack);

// The full benchmark: ground a fresh captioner (seeded by attack.seed),
// then run_attack. Deterministic given (dataset, attack, grounding).
BenchmarkResult run_toy_benchmark(const AttackDataset& dataset,
                                  const AttackConfig& attack,
                                  const GroundingConfig& grounding);

}  // namespace saup

#endif  // SAUP_PIPELINE_HPP
