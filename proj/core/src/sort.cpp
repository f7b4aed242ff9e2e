#include "saup/sort.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "saup/rng.hpp"
#include "saup/tokenizer.hpp"

namespace saup {

OptimizationSpace space_from_string(const std::string& name) {
  if (name == "normalized") return OptimizationSpace::kNormalized;
  if (name == "pixel") return OptimizationSpace::kPixel;
  throw ConfigError("unknown space '" + name + "' (normalized|pixel)");
}

std::string to_string(OptimizationSpace s) {
  return s == OptimizationSpace::kNormalized ? "normalized" : "pixel";
}

void AttackConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (momentum < 0.0 || momentum >= 1.0)
    throw ConfigError("momentum must be in [0,1)");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  loss.validate();
  mask.validate();
}

namespace {

// Masked entries i.i.d. uniform [0,1] in pixel space (draw order: c, y, x);
// unmasked entries 0.5. Shared by both arms so they start at the same point.
Tensor3 init_pixel_delta(const Mask& mask, Rng& rng) {
  Tensor3 d(mask.channels(), mask.height(), mask.width(), 0.5);
  for (int c = 0; c < mask.channels(); ++c)
    for (int y = 0; y < mask.height(); ++y)
      for (int x = 0; x < mask.width(); ++x)
        if (mask.values.at(c, y, x) != 0.0) d.at(c, y, x) = rng.uniform();
  return d;
}

// Per-example precomputation: model-space input and its objective.
struct PreparedExample {
  NormalizedTensor z;        // normalized resized image
  ImageTensor x;             // resized pixel image (pixel arm)
  SemanticSeparationObjective objective;
};

std::vector<PreparedExample> prepare_examples(const AttackDataset& dataset,
                                              const Captioner& model,
                                              const AttackConfig& cfg) {
  auto targets = dataset.tokenized_targets(model.eos_id());
  std::vector<PreparedExample> out;
  for (const DatasetEntry* e : dataset.split_entries(Split::kTrain)) {
    std::vector<std::vector<int>> others;
    for (const auto& [cls, ids] : targets)
      if (cls != e->class_id) others.push_back(ids);
    ImageTensor x =
        resize_to_model(e->image, model.input_height(), model.input_width());
    NormalizedTensor z = normalize(x, model.normalization());
    out.push_back(PreparedExample{
        std::move(z), std::move(x),
        SemanticSeparationObjective(tokenizer().encode(e->prompt),
                                    targets.at(e->class_id), std::move(others),
                                    cfg.loss)});
  }
  if (out.empty()) throw InputError("dataset has no train entries");
  return out;
}

void check_finite_loss(double loss, int epoch, size_t example,
                       const std::vector<double>& trace) {
  if (std::isfinite(loss)) return;
  std::ostringstream msg;
  msg << "loss became non-finite (" << loss << ") at epoch " << epoch
      << ", example " << example << "; trace tail:";
  size_t start = trace.size() > 5 ? trace.size() - 5 : 0;
  for (size_t i = start; i < trace.size(); ++i) msg << ' ' << trace[i];
  throw NumericalError(msg.str());
}

// The shared loop skeleton. `grad_of` maps the current delta + example to
// (loss, gradient w.r.t. delta restricted to the mask); `clamp` projects
// delta back onto its box after each update.
template <typename GradFn, typename ClampFn>
std::vector<double> run_updates(Tensor3& delta, const Mask& mask,
                                std::vector<PreparedExample>& examples,
                                const AttackConfig& cfg, Rng& shuffle_rng,
                                GradFn&& grad_of, ClampFn&& clamp) {
  std::vector<double> trace;
  std::vector<size_t> order(examples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  Tensor3 velocity(delta.channels, delta.height, delta.width, 0.0);
  Tensor3 batch_grad(delta.channels, delta.height, delta.width, 0.0);
  size_t batch_size = static_cast<size_t>(cfg.batch);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    size_t in_batch = 0;
    for (size_t k = 0; k < order.size(); ++k) {
      Tensor3 grad;
      double loss = grad_of(examples[order[k]], delta, grad);
      check_finite_loss(loss, epoch, order[k], trace);
      epoch_loss += loss;
      if (cfg.per_example_trace) trace.push_back(loss);

      for (size_t i = 0; i < grad.data.size(); ++i)
        batch_grad.data[i] += grad.data[i];
      ++in_batch;

      if (in_batch == batch_size || k + 1 == order.size()) {
        double l1 = 0.0;
        for (size_t i = 0; i < batch_grad.data.size(); ++i) {
          if (mask.values.data[i] == 0.0) {
            batch_grad.data[i] = 0.0;  // delta only exists on the mask
            continue;
          }
          batch_grad.data[i] /= static_cast<double>(in_batch);
          l1 += std::abs(batch_grad.data[i]);
        }
        if (cfg.normalize_gradient && l1 > 0.0)
          for (double& g : batch_grad.data) g /= l1;
        for (size_t i = 0; i < delta.data.size(); ++i) {
          if (mask.values.data[i] == 0.0) continue;
          velocity.data[i] =
              cfg.momentum * velocity.data[i] + batch_grad.data[i];
          delta.data[i] -= cfg.learning_rate * velocity.data[i];
        }
        clamp(delta);
        std::fill(batch_grad.data.begin(), batch_grad.data.end(), 0.0);
        in_batch = 0;
      }
    }
    if (!cfg.per_example_trace)
      trace.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return trace;
}

PerturbationArtifact make_artifact(const AttackDataset& dataset,
                                   const AttackConfig& cfg,
                                   const NormalizationSpec& spec,
                                   NormalizedTensor delta_normalized,
                                   ImageTensor delta_pixel,
                                   std::vector<double> trace) {
  PerturbationArtifact a;
  a.delta_normalized = std::move(delta_normalized);
  a.delta_pixel = quantize_to_8bit(delta_pixel);
  a.mask_spec = cfg.mask;
  a.normalization = spec;
  a.targets = dataset.targets;
  a.config = cfg;
  a.loss_trace = std::move(trace);
  return a;
}

}  // namespace

NormalizedTensor init_perturbation(const Mask& mask,
                                   const NormalizationSpec& spec,
                                   uint64_t seed) {
  spec.validate();
  if (mask.channels() != static_cast<int>(spec.mean.size()))
    throw DimensionError("init_perturbation: mask channels do not match spec");
  Rng rng(seed);
  Tensor3 pixel = init_pixel_delta(mask, rng);
  NormalizedTensor z;
  z.values = Tensor3(pixel.channels, pixel.height, pixel.width);
  z.lower_bound.resize(pixel.channels);
  z.upper_bound.resize(pixel.channels);
  for (int c = 0; c < pixel.channels; ++c) {
    z.lower_bound[c] = (0.0 - spec.mean[c]) / spec.std[c];
    z.upper_bound[c] = (1.0 - spec.mean[c]) / spec.std[c];
    for (int y = 0; y < pixel.height; ++y)
      for (int x = 0; x < pixel.width; ++x)
        z.values.at(c, y, x) = (pixel.at(c, y, x) - spec.mean[c]) / spec.std[c];
  }
  return z;
}

PerturbationArtifact optimize(const AttackDataset& dataset,
                              const Captioner& model, const AttackConfig& cfg) {
  cfg.validate();
  dataset.validate(/*require_test=*/false);
  if (cfg.space == OptimizationSpace::kPixel)
    return optimize_pixel_space(dataset, model, cfg);

  const NormalizationSpec& spec = model.normalization();
  Mask mask = make_mask(cfg.mask, model.input_channels(), model.input_height(),
                        model.input_width());
  std::vector<PreparedExample> examples = prepare_examples(dataset, model, cfg);

  NormalizedTensor delta = init_perturbation(mask, spec, cfg.seed);
  // Distinct stream for the epoch shuffles so the init draw count cannot
  // silently couple the two.
  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

  auto grad_of = [&](PreparedExample& ex, const Tensor3& d, Tensor3& grad) {
    NormalizedTensor z_adv = apply_masked_perturbation(ex.z, d, mask);
    return ex.objective.value_and_gradient(model, z_adv, grad);
  };
  auto clamp = [&](Tensor3& d) {
    for (int c = 0; c < d.channels; ++c) {
      double lo = delta.lower_bound[c], hi = delta.upper_bound[c];
      for (int y = 0; y < d.height; ++y)
        for (int x = 0; x < d.width; ++x)
          if (mask.values.at(c, y, x) != 0.0)
            d.at(c, y, x) = std::clamp(d.at(c, y, x), lo, hi);
    }
  };
  std::vector<double> trace = run_updates(delta.values, mask, examples, cfg,
                                          shuffle_rng, grad_of, clamp);

  return make_artifact(dataset, cfg, spec, delta, denormalize(delta, spec),
                       std::move(trace));
}

PerturbationArtifact optimize_pixel_space(const AttackDataset& dataset,
                                          const Captioner& model,
                                          AttackConfig cfg) {
  cfg.space = OptimizationSpace::kPixel;
  cfg.validate();
  dataset.validate(/*require_test=*/false);

  const NormalizationSpec& spec = model.normalization();
  Mask mask = make_mask(cfg.mask, model.input_channels(), model.input_height(),
                        model.input_width());
  std::vector<PreparedExample> examples = prepare_examples(dataset, model, cfg);

  Rng init_rng(cfg.seed);
  Tensor3 delta_pixel = init_pixel_delta(mask, init_rng);
  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

  auto grad_of = [&](PreparedExample& ex, const Tensor3& d, Tensor3& grad) {
    ImageTensor x_adv = apply_masked_perturbation_pixel(ex.x, d, mask);
    NormalizedTensor z_adv = normalize(x_adv, spec);
    double loss = ex.objective.value_and_gradient(model, z_adv, grad);
    // Chain rule through z = (x - mean) / std.
    for (int c = 0; c < grad.channels; ++c)
      for (int y = 0; y < grad.height; ++y)
        for (int xx = 0; xx < grad.width; ++xx) grad.at(c, y, xx) /= spec.std[c];
    return loss;
  };
  auto clamp = [&](Tensor3& d) {
    for (size_t i = 0; i < d.data.size(); ++i)
      if (mask.values.data[i] != 0.0)
        d.data[i] = std::clamp(d.data[i], 0.0, 1.0);
  };
  std::vector<double> trace = run_updates(delta_pixel, mask, examples, cfg,
                                          shuffle_rng, grad_of, clamp);

  ImageTensor delta_image(delta_pixel);
  return make_artifact(dataset, cfg, spec, normalize(delta_image, spec),
                       delta_image, std::move(trace));
}

}  // namespace saup
