#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "saup/captioner.hpp"
#include "saup/losses.hpp"
#include "saup/rng.hpp"

using namespace saup;

namespace {

NormalizedTensor random_input(const Captioner& model, uint64_t seed) {
  Rng rng(seed);
  ImageTensor img(model.input_channels(), model.input_height(),
                  model.input_width());
  for (double& v : img.values.data) v = rng.uniform();
  return normalize(img, model.normalization());
}

// Pin the first-step distribution: w_out = 0 makes every step emit softmax of
// b_out, and with sum(exp(b_out)) == 1 the entries ARE the probabilities.
ToyCaptioner rigged_model(double p_correct, double p_other, int correct_id,
                          int other_id) {
  ToyCaptioner model(0);
  ToyCaptionerTestAccess access(model);
  access.w_out().setZero();
  double rest = (1.0 - p_correct - p_other) / 62.0;
  for (int t = 0; t < Tokenizer::kVocabSize; ++t)
    access.b_out()(t) = std::log(rest);
  access.b_out()(correct_id) = std::log(p_correct);
  access.b_out()(other_id) = std::log(p_other);
  return model;
}

}  // namespace

TEST_CASE("cross-entropy under a uniform readout is N log V") {
  ToyCaptioner model(3);
  ToyCaptionerTestAccess(model).w_out().setZero();
  NormalizedTensor z = random_input(model, 2);
  std::vector<int> target = {17, 23, 31, 0};
  double ce = ce_loss(model, z, {41}, target);
  CHECK(ce == doctest::Approx(4.0 * std::log(64.0)).epsilon(1e-9));
}

TEST_CASE("cross-entropy is minus the sequence log-probability") {
  ToyCaptioner model(4);
  NormalizedTensor z = random_input(model, 5);
  std::vector<int> target = {19, 0};
  CHECK(ce_loss(model, z, {41}, target) ==
        doctest::Approx(-sequence_logprob(model, z, {41}, target))
            .epsilon(1e-12));
}

TEST_CASE("margin loss reproduces the hand-computed hinge value") {
  // Single-token sequences with P(correct) = 0.2, P(other) = 0.3, m = 0.1:
  // max(0, 0.1 - 0.2 + 0.3) = 0.2.
  ToyCaptioner model = rigged_model(0.2, 0.3, 17, 18);
  NormalizedTensor z = random_input(model, 1);
  double loss = margin_loss(model, z, {41}, {17}, {{18}}, 0.1);
  CHECK(loss == doctest::Approx(0.2).epsilon(1e-12));

  // Two others average the hinges: other ids 18 (P=.3) and 19 (P=(1-.5)/62).
  // The second hinge argument 0.1 - 0.2 + 0.5/62 is negative, so it clamps.
  double rest = 0.5 / 62.0;
  double expected = 0.5 * (std::max(0.0, 0.1 - 0.2 + 0.3) +
                           std::max(0.0, 0.1 - 0.2 + rest));
  CHECK(margin_loss(model, z, {41}, {17}, {{18}, {19}}, 0.1) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("a satisfied hinge contributes exactly zero") {
  // P(correct) = 0.6, P(other) = 0.01, m = 0.1 -> 0.1 - 0.6 + 0.01 < 0.
  ToyCaptioner model = rigged_model(0.6, 0.01, 17, 18);
  NormalizedTensor z = random_input(model, 1);
  CHECK(margin_loss(model, z, {41}, {17}, {{18}}, 0.1) == 0.0);
}

TEST_CASE("empty competitor set makes the margin term vanish") {
  ToyCaptioner model(2);
  NormalizedTensor z = random_input(model, 3);
  CHECK(margin_loss(model, z, {41}, {17, 0}, {}, 0.5) == 0.0);

  LossConfig cfg;
  CHECK(combined_loss(model, z, {41}, {17, 0}, {}, cfg) ==
        doctest::Approx(ce_loss(model, z, {41}, {17, 0})).epsilon(1e-12));
}

TEST_CASE("lambda zero reduces the combined loss to cross-entropy") {
  ToyCaptioner model(2);
  NormalizedTensor z = random_input(model, 3);
  LossConfig cfg;
  cfg.lambda = 0.0;
  std::vector<std::vector<int>> others = {{18, 0}, {19, 0}};
  CHECK(combined_loss(model, z, {41}, {17, 0}, others, cfg) ==
        doctest::Approx(ce_loss(model, z, {41}, {17, 0})).epsilon(1e-12));
}

TEST_CASE("combined loss is cross-entropy plus weighted margin") {
  ToyCaptioner model(6);
  NormalizedTensor z = random_input(model, 7);
  LossConfig cfg;
  cfg.lambda = 2.5;
  cfg.margin = 0.4;
  std::vector<std::vector<int>> others = {{18, 0}, {25, 31, 0}};
  double combined = combined_loss(model, z, {41}, {17, 0}, others, cfg);
  double expected =
      ce_loss(model, z, {41}, {17, 0}) +
      2.5 * margin_loss(model, z, {41}, {17, 0}, others, 0.4);
  CHECK(combined == doctest::Approx(expected).epsilon(1e-12));
  CHECK(margin_loss(model, z, {41}, {17, 0}, others, 0.4) >= 0.0);
}

TEST_CASE("length normalization compares per-token geometric means") {
  ToyCaptioner model = rigged_model(0.2, 0.3, 17, 18);
  NormalizedTensor z = random_input(model, 1);
  // Two-token sequences: raw P = p^2, normalized P = exp(2 ln p / 2) = p.
  double raw = margin_loss(model, z, {41}, {17, 17}, {{18, 18}}, 0.1, false);
  CHECK(raw == doctest::Approx(0.1 - 0.04 + 0.09).epsilon(1e-12));
  double normed = margin_loss(model, z, {41}, {17, 17}, {{18, 18}}, 0.1, true);
  CHECK(normed == doctest::Approx(0.1 - 0.2 + 0.3).epsilon(1e-12));
}

TEST_CASE("objective value matches the free-function loss") {
  ToyCaptioner model(8);
  NormalizedTensor z = random_input(model, 9);
  LossConfig cfg;
  cfg.lambda = 1.0;
  cfg.margin = 0.5;
  std::vector<std::vector<int>> others = {{18, 0}, {19, 0}};
  SemanticSeparationObjective obj({41}, {17, 0}, others, cfg);
  CHECK(obj.value(model, z) ==
        doctest::Approx(combined_loss(model, z, {41}, {17, 0}, others, cfg))
            .epsilon(1e-12));

  Tensor3 grad;
  double v = obj.value_and_gradient(model, z, grad);
  CHECK(v == doctest::Approx(obj.value(model, z)).epsilon(1e-12));
  Tensor3 g2 = obj.gradient(model, z);
  REQUIRE(grad.data.size() == g2.data.size());
  for (size_t i = 0; i < grad.data.size(); ++i)
    CHECK(grad.data[i] == g2.data[i]);
}

TEST_CASE("objective gradient agrees with central finite differences") {
  ToyCaptioner model(1);
  NormalizedTensor z = random_input(model, 4);
  LossConfig cfg;  // defaults: lambda 1, margin 0.5 (hinges firmly active)
  std::vector<std::vector<int>> others = {{18, 0}, {29, 0}};
  SemanticSeparationObjective obj({41, 42, 43}, {17, 0}, others, cfg);

  Tensor3 grad;
  obj.value_and_gradient(model, z, grad);

  Rng rng(23);
  const double h = 1e-4;
  for (int trial = 0; trial < 25; ++trial) {
    size_t idx = rng.below(grad.data.size());
    NormalizedTensor zp = z, zm = z;
    zp.values.data[idx] += h;
    zm.values.data[idx] -= h;
    double fd = (obj.value(model, zp) - obj.value(model, zm)) / (2.0 * h);
    CHECK(std::abs(fd - grad.data[idx]) <=
          1e-6 * std::max(1.0, std::abs(grad.data[idx])));
  }
}

TEST_CASE("satisfied hinges leave only the cross-entropy gradient") {
  // Rig P(correct) high and P(other) tiny so the hinge is strictly inactive;
  // the margin term must then contribute nothing to the gradient.
  ToyCaptioner model(5);
  ToyCaptionerTestAccess access(model);
  access.b_out()(17) = 20.0;  // boost correct token everywhere
  NormalizedTensor z = random_input(model, 6);

  LossConfig cfg;
  cfg.lambda = 3.0;
  cfg.margin = 0.01;
  std::vector<std::vector<int>> others = {{18}};
  REQUIRE(margin_loss(model, z, {41}, {17}, others, cfg.margin) == 0.0);

  SemanticSeparationObjective with_margin({41}, {17}, others, cfg);
  LossConfig ce_only = cfg;
  ce_only.lambda = 0.0;
  SemanticSeparationObjective without({41}, {17}, {}, ce_only);

  Tensor3 g1, g2;
  with_margin.value_and_gradient(model, z, g1);
  without.value_and_gradient(model, z, g2);
  REQUIRE(g1.data.size() == g2.data.size());
  for (size_t i = 0; i < g1.data.size(); ++i) CHECK(g1.data[i] == g2.data[i]);
}

TEST_CASE("loss config validation") {
  LossConfig ok;
  CHECK_NOTHROW(ok.validate());
  LossConfig bad_margin;
  bad_margin.margin = 0.0;
  CHECK_THROWS_AS(bad_margin.validate(), ConfigError);
  LossConfig bad_lambda;
  bad_lambda.lambda = -1.0;
  CHECK_THROWS_AS(bad_lambda.validate(), ConfigError);
}
