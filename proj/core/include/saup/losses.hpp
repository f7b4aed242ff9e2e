#ifndef SAUP_LOSSES_HPP
#define SAUP_LOSSES_HPP

#include <vector>

#include "saup/captioner.hpp"

namespace saup {

struct LossConfig {
  double lambda = 1.0;            // margin term weight; 0 disables it
  double margin = 0.5;            // minimum separation m between sequence probs
  bool length_normalize = false;  // compare per-token geometric means instead

  void validate() const;  // margin > 0, lambda >= 0
};

// -sum_i log P(t_i | t_<i, z, prompt). Equals -sequence_logprob.
double ce_loss(const Captioner& model, const NormalizedTensor& z,
               const std::vector<int>& prompt, const std::vector<int>& target);

// mean over others of max(0, m - P(correct) + P(other)), probabilities via
// exp(sequence_logprob) (optionally length-normalized). Empty others -> 0.
double margin_loss(const Captioner& model, const NormalizedTensor& z,
                   const std::vector<int>& prompt,
                   const std::vector<int>& correct_target,
                   const std::vector<std::vector<int>>& other_targets,
                   double m, bool length_normalize = false);

// ce_loss + lambda * margin_loss.
double combined_loss(const Captioner& model, const NormalizedTensor& z,
                     const std::vector<int>& prompt,
                     const std::vector<int>& correct_target,
                     const std::vector<std::vector<int>>& other_targets,
                     const LossConfig& cfg);

// The full semantic-separation objective as a differentiable functional of z.
// Gradient is assembled from per-target logprob gradients via the chain rule;
// hinge pairs already satisfied contribute exactly zero (subgradient 0 at the
// kink).
class SemanticSeparationObjective : public ImageObjective {
 public:
  SemanticSeparationObjective(std::vector<int> prompt,
                              std::vector<int> correct_target,
                              std::vector<std::vector<int>> other_targets,
                              LossConfig cfg);

  double value(const Captioner& model, const NormalizedTensor& z) const override;
  Tensor3 gradient(const Captioner& model, const NormalizedTensor& z) const override;

  // One fused pass: the optimizer needs both per step and the logprob
  // gradients are shared between the loss value and its derivative.
  double value_and_gradient(const Captioner& model, const NormalizedTensor& z,
                            Tensor3& grad) const;

 private:
  bool m_active(double p_correct, double p_other) const;

  std::vector<int> prompt_;
  std::vector<int> correct_;
  std::vector<std::vector<int>> others_;
  LossConfig cfg_;
};

}  // namespace saup

#endif  // SAUP_LOSSES_HPP
