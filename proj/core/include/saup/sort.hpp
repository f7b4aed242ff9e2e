#ifndef SAUP_SORT_HPP
#define SAUP_SORT_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "saup/captioner.hpp"
#include "saup/datakit.hpp"
#include "saup/losses.hpp"
#include "saup/masks.hpp"
#include "saup/tensor.hpp"

namespace saup {

enum class OptimizationSpace { kNormalized, kPixel };

OptimizationSpace space_from_string(const std::string& name);
std::string to_string(OptimizationSpace s);

struct AttackConfig {
  int epochs = 500;
  double learning_rate = 0.01;
  double momentum = 0.9;
  LossConfig loss;  // lambda defaults to 1
  uint64_t seed = 0;
  MaskSpec mask;
  OptimizationSpace space = OptimizationSpace::kNormalized;
  int batch = 1;  // examples per velocity update
  // Accumulate L1-normalized gradients (momentum-iterative style). Off gives
  // raw-gradient momentum, the plain-GD degenerate case used in tests.
  bool normalize_gradient = true;
  // false: one trace entry per epoch (mean loss); true: one per example step.
  bool per_example_trace = false;

  void validate() const;
};

struct PerturbationArtifact {
  NormalizedTensor delta_normalized;
  ImageTensor delta_pixel;  // denormalized then 8-bit quantized
  MaskSpec mask_spec;
  NormalizationSpec normalization;
  std::map<int, std::string> targets;  // class id -> target string
  AttackConfig config;
  std::vector<double> loss_trace;
  std::string model_reference;       // path of the weight blob
  uint64_t model_weights_hash = 0;   // FNV-1a of the blob
  std::string config_hash;           // hex hash of the canonical run config
  // Train-split ASR measured right after optimization; re-evaluating the
  // saved artifact must reproduce it exactly. Negative = not yet recorded.
  double recorded_train_asr = -1.0;
};

// Masked entries: i.i.d. uniform [0,1] in pixel space, then normalized.
// Unmasked entries: the channel midpoint f_T(0.5) (inert — the mask gates
// them out of every forward pass and update).
NormalizedTensor init_perturbation(const Mask& mask,
                                   const NormalizationSpec& spec,
                                   uint64_t seed);

// The optimization loop: per-example momentum updates on the masked entries
// of delta, clamped to the admissible bounds each step. Dispatches on
// cfg.space; the pixel arm exists for the without-normalized-space ablation.
PerturbationArtifact optimize(const AttackDataset& dataset,
                              const Captioner& model, const AttackConfig& cfg);

// The pixel-space arm: delta lives in [0,1], normalization runs inside the
// forward pass, gradients are chain-ruled back through it (divide by sigma).
PerturbationArtifact optimize_pixel_space(const AttackDataset& dataset,
                                          const Captioner& model,
                                          AttackConfig cfg);

}  // namespace saup

#endif  // SAUP_SORT_HPP
