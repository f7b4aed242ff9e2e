#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include "saup/artifact_io.hpp"
#include "saup/error.hpp"
#include "saup/pipeline.hpp"
#include "saup/rng.hpp"
#include "saup/tokenizer.hpp"

using namespace saup;

namespace {

AttackDataset small_synthetic(int classes, int per_class, uint64_t seed,
                              int side = 32) {
  SyntheticConfig cfg;
  cfg.classes = classes;
  cfg.per_class = per_class;
  cfg.height = side;
  cfg.width = side;
  cfg.seed = seed;
  return generate_synthetic(cfg);
}

}  // namespace

TEST_CASE("class captions pair each class with its vocabulary word") {
  CHECK(class_caption(0) == std::vector<int>{1, 0});
  CHECK(class_caption(1) == std::vector<int>{2, 0});
  CHECK(class_caption(15) == std::vector<int>{16, 0});
  // The caption is the word itself plus end-of-sequence.
  CHECK(tokenizer().decode(class_caption(0)) == "amber <eos>");
  CHECK_THROWS_AS(class_caption(16), InputError);
  CHECK_THROWS_AS(class_caption(-1), InputError);
}

TEST_CASE("painting alters exactly the masked pixels, to the paint color") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const int side = 16 + static_cast<int>(rng.below(48));
    const MaskShape shape =
        (trial % 2 == 0) ? MaskShape::kFrame : MaskShape::kCorner;
    const int ref = 6 + static_cast<int>(rng.below(40));
    const Mask mask = make_mask(shape, 3, side, side, ref);

    ImageTensor image(3, side, side);
    for (double& v : image.values.data) v = rng.uniform();
    const ImageTensor before = image;

    const ImageTensor painted = paint_region(image, mask);
    REQUIRE(painted.values.same_shape(image.values));
    const size_t plane = static_cast<size_t>(side) * side;
    for (size_t i = 0; i < painted.values.data.size(); ++i) {
      const int c = static_cast<int>(i / plane);
      if (mask.values.data[i] != 0.0) {
        CHECK(painted.values.data[i] == (c == 1 ? 0.0 : 1.0));
      } else {
        CHECK(painted.values.data[i] == image.values.data[i]);
      }
    }
    // The input is left untouched.
    CHECK(image.values.data == before.values.data);
  }

  const Mask mask = make_mask(MaskShape::kFrame, 3, 32, 32, 20);
  ImageTensor wrong(3, 16, 16, 0.5);
  CHECK_THROWS_AS(paint_region(wrong, mask), DimensionError);
}

TEST_CASE("pretraining set holds a class caption and a painted target caption "
          "per train image") {
  const AttackDataset ds = small_synthetic(2, 7, 11);
  const ToyCaptioner model(3);
  const MaskSpec spec{MaskShape::kFrame, 20};
  const auto examples = build_pretraining_examples(ds, model, spec);

  const auto train = ds.split_entries(Split::kTrain);
  REQUIRE(examples.size() == 2 * train.size());
  const auto targets = ds.tokenized_targets(model.eos_id());
  const Mask mask = make_mask(spec, 3, 32, 32);

  for (size_t i = 0; i < train.size(); ++i) {
    const DatasetEntry* e = train[i];
    // First half: the clean image captioned with its class word.
    CHECK(examples[i].caption == class_caption(e->class_id));
    CHECK(examples[i].prompt == tokenizer().encode(e->prompt));
    const NormalizedTensor clean = normalize(e->image, model.normalization());
    CHECK(examples[i].image.values.data == clean.values.data);
    // Second half: the painted copy captioned with the class's target.
    const SupervisedExample& painted = examples[train.size() + i];
    CHECK(painted.caption == targets.at(e->class_id));
    CHECK(painted.prompt == examples[i].prompt);
    const NormalizedTensor want =
        normalize(paint_region(e->image, mask), model.normalization());
    CHECK(painted.image.values.data == want.values.data);
  }
}

TEST_CASE("resize_for_model passes model-sized images through bit-identically "
          "and rescales others") {
  const ToyCaptioner model(5);

  const AttackDataset at_size = small_synthetic(2, 3, 7, 32);
  const AttackDataset same = resize_for_model(at_size, model);
  REQUIRE(same.entries.size() == at_size.entries.size());
  for (size_t i = 0; i < same.entries.size(); ++i) {
    CHECK(same.entries[i].image.values.data ==
          at_size.entries[i].image.values.data);
  }

  const AttackDataset large = small_synthetic(2, 3, 7, 48);
  const AttackDataset shrunk = resize_for_model(large, model);
  for (const DatasetEntry& e : shrunk.entries) {
    CHECK(e.image.height() == model.input_height());
    CHECK(e.image.width() == model.input_width());
    for (double v : e.image.values.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  CHECK(shrunk.targets == large.targets);
}

TEST_CASE("grounded captioner learns both caption tasks deterministically") {
  const AttackDataset ds = small_synthetic(2, 14, 1);
  const MaskSpec spec{MaskShape::kFrame, 20};
  GroundingConfig cfg;

  ToyCaptioner model = make_grounded_captioner(ds, spec, cfg, 1);
  CHECK(clean_caption_accuracy(model, ds, Split::kTrain) == 1.0);

  // The painted region routes every class to its own target.
  const Mask mask = make_mask(spec, 3, 32, 32);
  const auto targets = ds.tokenized_targets(model.eos_id());
  for (const DatasetEntry* e : ds.split_entries(Split::kTrain)) {
    const NormalizedTensor z =
        normalize(paint_region(e->image, mask), model.normalization());
    const auto decoded =
        model.greedy_decode(z, tokenizer().encode(e->prompt), 3);
    CHECK(exact_match(decoded, targets.at(e->class_id), model.eos_id()));
  }

  const ToyCaptioner again = make_grounded_captioner(ds, spec, cfg, 1);
  CHECK(again.weights_hash() == model.weights_hash());
  const ToyCaptioner other = make_grounded_captioner(ds, spec, cfg, 2);
  CHECK(other.weights_hash() != model.weights_hash());

  GroundingConfig bad;
  bad.epochs = 0;
  CHECK_THROWS_AS(make_grounded_captioner(ds, spec, bad, 1), ConfigError);
  bad = GroundingConfig{};
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(make_grounded_captioner(ds, spec, bad, 1), ConfigError);
}

TEST_CASE("benchmark runs are bit-identical across repeats and fill the "
          "artifact bookkeeping") {
  const AttackDataset ds = small_synthetic(2, 7, 5);
  AttackConfig attack;
  attack.seed = 5;
  attack.mask = MaskSpec{MaskShape::kFrame, 20};
  attack.epochs = 40;
  const GroundingConfig grounding;

  BenchmarkResult first = run_toy_benchmark(ds, attack, grounding);
  BenchmarkResult second = run_toy_benchmark(ds, attack, grounding);

  CHECK(artifact_to_json(first.artifact) == artifact_to_json(second.artifact));
  CHECK(report_to_json(first.train_report) ==
        report_to_json(second.train_report));
  CHECK(report_to_json(first.test_report) ==
        report_to_json(second.test_report));

  CHECK(first.artifact.recorded_train_asr == first.train_report.overall_asr);
  CHECK(first.artifact.model_weights_hash == first.model.weights_hash());
  CHECK(first.artifact.loss_trace.size() == 40);
  CHECK(first.optimize_seconds > 0.0);
  CHECK(first.clean_train_accuracy >= 0.0);
  CHECK(first.clean_train_accuracy <= 1.0);
  CHECK(first.clean_test_accuracy >= 0.0);
  CHECK(first.clean_test_accuracy <= 1.0);
  CHECK(first.train_report.split == "train");
  CHECK(first.test_report.split == "test");
}
