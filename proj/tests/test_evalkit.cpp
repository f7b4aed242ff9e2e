#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "saup/evalkit.hpp"
#include "saup/rng.hpp"
#include "saup/tokenizer.hpp"

using namespace saup;

namespace {

// Captioner whose decode is a transparent function of one unmasked pixel:
// the class band of the image center (or always band 0 under a prompt that
// starts with "what"). Makes every aggregate brute-force checkable.
class BandCaptioner : public Captioner {
 public:
  BandCaptioner() : norm_(NormalizationSpec::symmetric(3, 32, 32)) {}
  int vocab_size() const override { return 64; }
  int eos_id() const override { return 0; }
  int input_channels() const override { return 3; }
  int input_height() const override { return 32; }
  int input_width() const override { return 32; }
  int feature_dim() const override { return 4; }
  const NormalizationSpec& normalization() const override { return norm_; }

  std::vector<double> token_logprobs(const NormalizedTensor&,
                                     const std::vector<int>&,
                                     const std::vector<int>& target) const override {
    return std::vector<double>(target.size(), -std::log(64.0));
  }
  LogprobGradient sequence_logprob_with_gradient(
      const NormalizedTensor& z, const std::vector<int>&,
      const std::vector<int>& target) const override {
    LogprobGradient g;
    g.logprob = -std::log(64.0) * static_cast<double>(target.size());
    g.grad = Tensor3(z.channels(), z.height(), z.width(), 0.0);
    return g;
  }
  std::vector<int> greedy_decode(const NormalizedTensor& z,
                                 const std::vector<int>& prompt,
                                 int max_len) const override {
    last_budget = max_len;
    int tok = (!prompt.empty() && prompt[0] == 44)
                  ? 17
                  : 17 + band(z.values.at(0, 16, 16));
    return {tok, 0};
  }
  std::vector<double> penultimate_features(const NormalizedTensor&,
                                           const std::vector<int>&) const override {
    return std::vector<double>(4, 0.0);
  }

  static int band(double v) {
    int b = static_cast<int>((v + 1.0) / 2.0 * 5.0);
    return std::clamp(b, 0, 4);
  }

  mutable int last_budget = -1;

 private:
  NormalizationSpec norm_;
};

PerturbationArtifact stub_artifact(const AttackDataset& ds,
                                   const NormalizationSpec& spec,
                                   uint64_t seed) {
  Rng rng(seed);
  ImageTensor dp(3, 32, 32);
  for (double& v : dp.values.data) v = rng.uniform();
  dp = quantize_to_8bit(dp);
  PerturbationArtifact art;
  art.delta_pixel = dp;
  art.delta_normalized = normalize(dp, spec);
  art.mask_spec = MaskSpec{MaskShape::kFrame, 6};
  art.normalization = spec;
  art.targets = ds.targets;
  art.config_hash = "0011223344556677";
  return art;
}

AttackDataset banded_dataset() {
  SyntheticConfig cfg;
  cfg.classes = 5;
  cfg.per_class = 17;  // 12 train + 5 test per class -> 25 test entries
  cfg.seed = 21;
  AttackDataset ds = generate_synthetic(cfg);
  // Tag trajectories so the per-trajectory aggregate has something to count.
  int i = 0;
  for (auto& e : ds.entries) e.trajectory_id = "t" + std::to_string(i++ % 2);
  return ds;
}

}  // namespace

TEST_CASE("exact match strips trailing terminators only") {
  const int eos = 0;
  CHECK(exact_match({17, 0}, {17, 0}, eos));
  CHECK(exact_match({17}, {17, 0}, eos));
  CHECK(exact_match({17, 0, 0}, {17}, eos));
  CHECK(exact_match({0}, {0}, eos));
  CHECK(exact_match({}, {0}, eos));
  CHECK(exact_match({0, 0}, {}, eos));

  CHECK_FALSE(exact_match({17, 18}, {17}, eos));      // trailing garbage
  CHECK_FALSE(exact_match({18, 0}, {17, 0}, eos));    // wrong token
  CHECK_FALSE(exact_match({17}, {17, 18}, eos));      // missing token
  CHECK_FALSE(exact_match({0, 17}, {17}, eos));       // eos mid-sequence counts
  CHECK_FALSE(exact_match({17, 0, 18}, {17}, eos));
}

TEST_CASE("evaluation aggregates match a brute-force recount of 50 cases") {
  AttackDataset ds = banded_dataset();
  BandCaptioner model;
  PerturbationArtifact art = stub_artifact(ds, model.normalization(), 3);
  std::vector<std::string> prompts = {"describe this image",
                                      "what is in the picture"};

  EvalReport report = evaluate(art, ds, model, prompts, Split::kTest);

  // Brute-force oracle straight off the raw dataset images. The frame mask
  // never touches the center pixel, so the decode rule is recomputable
  // without any of the evaluation plumbing.
  int total = 0, hits = 0;
  std::map<int, int> cls_hits, cls_total;
  std::map<std::string, int> prompt_hits, prompt_total;
  std::map<std::string, int> traj_hits, traj_total;
  std::map<int, std::map<int, int>> confusion;
  for (const auto& e : ds.entries) {
    if (e.split != Split::kTest) continue;
    double v = (e.image.values.at(0, 16, 16) - 0.5) / 0.5;
    for (const std::string& ptext : prompts) {
      int tok = (ptext == "what is in the picture")
                    ? 17
                    : 17 + BandCaptioner::band(v);
      int matched_cls = tok - 17;
      bool ok = matched_cls == e.class_id;
      ++total;
      ++cls_total[e.class_id];
      ++prompt_total[ptext];
      ++traj_total[e.trajectory_id];
      ++confusion[e.class_id][matched_cls];
      if (ok) {
        ++hits;
        ++cls_hits[e.class_id];
        ++prompt_hits[ptext];
        ++traj_hits[e.trajectory_id];
      }
    }
  }
  REQUIRE(total == 50);

  CHECK(report.overall_asr == static_cast<double>(hits) / total);
  CHECK(hits > 0);          // the oracle must exercise real hits
  CHECK(hits < total);      // ... and real misses
  for (const auto& [cls, count] : cls_total) {
    CHECK(report.per_class_count.at(cls) == count);
    CHECK(report.per_class_asr.at(cls) ==
          static_cast<double>(cls_hits[cls]) / count);
  }
  for (const auto& [text, count] : prompt_total)
    CHECK(report.per_prompt_asr.at(text) ==
          static_cast<double>(prompt_hits[text]) / count);
  for (const auto& [traj, count] : traj_total)
    CHECK(report.per_trajectory_asr.at(traj) ==
          static_cast<double>(traj_hits[traj]) / count);
  for (const auto& [cls, row] : confusion)
    for (const auto& [matched, count] : row)
      CHECK(report.confusion.at(cls).at(matched) == count);

  // Confusion rows account for every case of their class.
  for (const auto& [cls, row] : report.confusion) {
    int sum = 0;
    for (const auto& [matched, count] : row) sum += count;
    CHECK(sum == report.per_class_count.at(cls));
  }

  // The artifact's stored raw delta is the exact normalization of its pixel
  // delta, so both decode paths see identical inputs.
  CHECK(report.raw_delta_asr == report.overall_asr);
  CHECK(report.quantization_gap == 0.0);

  CHECK(report.split == "test");
  CHECK(report.config_hash == "0011223344556677");
  // Single-word targets: generation budget is longest target (1) + 2.
  CHECK(model.last_budget == 3);
}

TEST_CASE("empty prompt list falls back to each entry's own prompt") {
  AttackDataset ds = banded_dataset();
  BandCaptioner model;
  PerturbationArtifact art = stub_artifact(ds, model.normalization(), 3);

  EvalReport own = evaluate(art, ds, model, {}, Split::kTest);
  CHECK(own.per_prompt_asr.empty());  // only reported for >1 prompts
  EvalReport one =
      evaluate(art, ds, model, {"describe this image"}, Split::kTest);
  CHECK(one.per_prompt_asr.empty());
  // Entry prompts are all "describe this image", so the numbers agree.
  CHECK(own.overall_asr == one.overall_asr);

  int cases = 0;
  for (const auto& [cls, count] : own.per_class_count) cases += count;
  CHECK(cases == 25);  // one case per test entry
}

TEST_CASE("evaluation is deterministic") {
  AttackDataset ds = banded_dataset();
  BandCaptioner model;
  PerturbationArtifact art = stub_artifact(ds, model.normalization(), 3);
  EvalReport a = evaluate(art, ds, model, {}, Split::kTest);
  EvalReport b = evaluate(art, ds, model, {}, Split::kTest);
  CHECK(a.overall_asr == b.overall_asr);
  CHECK(a.per_class_asr == b.per_class_asr);
  CHECK(a.confusion == b.confusion);
  CHECK(a.token_confidence == b.token_confidence);
}

TEST_CASE("token confidence has class rows and per-target-token columns") {
  SyntheticConfig cfg;
  cfg.classes = 2;
  cfg.per_class = 7;  // 5 train + 2 test
  cfg.words_per_target = 2;
  AttackDataset ds = generate_synthetic(cfg);
  BandCaptioner model;
  PerturbationArtifact art = stub_artifact(ds, model.normalization(), 1);

  EvalReport report = evaluate(art, ds, model, {}, Split::kTest);
  REQUIRE(report.token_confidence.size() == 2);
  REQUIRE(report.token_confidence[0].size() == 4);  // 2 classes x 2 words
  CHECK(report.token_confidence_classes == std::vector<int>{0, 1});
  CHECK(report.token_confidence_columns ==
        std::vector<std::string>{"quartz(class0)", "raven(class0)",
                                 "saddle(class1)", "tulip(class1)"});
  // The stub's distribution is uniform: every mean probability is 1/64.
  for (const auto& row : report.token_confidence)
    for (double v : row) CHECK(v == doctest::Approx(1.0 / 64).epsilon(1e-12));

  std::vector<std::vector<double>> direct =
      token_confidence_matrix(art, ds, model, Split::kTest);
  CHECK(direct == report.token_confidence);
}

TEST_CASE("token confidence reflects rigged model preferences") {
  SyntheticConfig cfg;
  cfg.classes = 2;
  cfg.per_class = 4;
  AttackDataset ds = generate_synthetic(cfg);
  ToyCaptioner model(0);
  ToyCaptionerTestAccess access(model);
  access.w_out().setZero();
  access.b_out()(17) = 2.0;  // "quartz" systematically preferred
  PerturbationArtifact art = stub_artifact(ds, model.normalization(), 2);

  std::vector<std::vector<double>> m =
      token_confidence_matrix(art, ds, model, Split::kTest);
  REQUIRE(m.size() == 2);
  REQUIRE(m[0].size() == 2);
  for (const auto& row : m) {
    for (double v : row) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
    CHECK(row[0] > row[1]);  // P(quartz) > P(raven) for every class row
  }
}

TEST_CASE("evaluation rejects broken inputs") {
  AttackDataset ds = banded_dataset();
  BandCaptioner model;
  PerturbationArtifact art = stub_artifact(ds, model.normalization(), 3);

  PerturbationArtifact missing = art;
  missing.targets.erase(4);
  CHECK_THROWS_AS(evaluate(missing, ds, model, {}, Split::kTest), ConfigError);

  AttackDataset train_only = ds;
  for (auto& e : train_only.entries) e.split = Split::kTrain;
  CHECK_THROWS_AS(evaluate(art, train_only, model, {}, Split::kTest),
                  InputError);
}
