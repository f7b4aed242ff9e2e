#include "saup/losses.hpp"

#include <cmath>
#include <utility>

namespace saup {

void LossConfig::validate() const {
  if (!(margin > 0.0))
    throw ConfigError("margin must be > 0, got " + std::to_string(margin));
  if (lambda < 0.0)
    throw ConfigError("lambda must be >= 0, got " + std::to_string(lambda));
}

namespace {

// exp(logprob), optionally length-normalized to a per-token geometric mean.
double sequence_prob(double logprob, size_t len, bool length_normalize) {
  if (length_normalize && len > 0)
    return std::exp(logprob / static_cast<double>(len));
  return std::exp(logprob);
}

}  // namespace

double ce_loss(const Captioner& model, const NormalizedTensor& z,
               const std::vector<int>& prompt,
               const std::vector<int>& target) {
  return -sequence_logprob(model, z, prompt, target);
}

double margin_loss(const Captioner& model, const NormalizedTensor& z,
                   const std::vector<int>& prompt,
                   const std::vector<int>& correct_target,
                   const std::vector<std::vector<int>>& other_targets,
                   double m, bool length_normalize) {
  if (other_targets.empty()) return 0.0;
  double p_correct =
      sequence_prob(sequence_logprob(model, z, prompt, correct_target),
                    correct_target.size(), length_normalize);
  double sum = 0.0;
  for (const auto& other : other_targets) {
    double p_other = sequence_prob(sequence_logprob(model, z, prompt, other),
                                   other.size(), length_normalize);
    sum += std::max(0.0, m - p_correct + p_other);
  }
  return sum / static_cast<double>(other_targets.size());
}

double combined_loss(const Captioner& model, const NormalizedTensor& z,
                     const std::vector<int>& prompt,
                     const std::vector<int>& correct_target,
                     const std::vector<std::vector<int>>& other_targets,
                     const LossConfig& cfg) {
  cfg.validate();
  double loss = ce_loss(model, z, prompt, correct_target);
  if (cfg.lambda > 0.0)
    loss += cfg.lambda * margin_loss(model, z, prompt, correct_target,
                                     other_targets, cfg.margin,
                                     cfg.length_normalize);
  return loss;
}

SemanticSeparationObjective::SemanticSeparationObjective(
    std::vector<int> prompt, std::vector<int> correct_target,
    std::vector<std::vector<int>> other_targets, LossConfig cfg)
    : prompt_(std::move(prompt)),
      correct_(std::move(correct_target)),
      others_(std::move(other_targets)),
      cfg_(cfg) {
  cfg_.validate();
  if (correct_.empty()) throw InputError("correct target must be non-empty");
}

double SemanticSeparationObjective::value(const Captioner& model,
                                          const NormalizedTensor& z) const {
  return combined_loss(model, z, prompt_, correct_, others_, cfg_);
}

Tensor3 SemanticSeparationObjective::gradient(const Captioner& model,
                                              const NormalizedTensor& z) const {
  Tensor3 grad;
  value_and_gradient(model, z, grad);
  return grad;
}

double SemanticSeparationObjective::value_and_gradient(
    const Captioner& model, const NormalizedTensor& z, Tensor3& grad) const {
  // One logprob+gradient pass per sequence, then chain rule:
  //   d(-logP_c)/dz                   = -dlogP_c/dz
  //   dP/dz                           = P * dlogP/dz   (per-token mean if
  //                                     length-normalized: P^ * dlogP/dz / n)
  //   active hinge (m - P_c + P_i > 0) adds lambda/K * (dP_i - dP_c).
  LogprobGradient correct =
      model.sequence_logprob_with_gradient(z, prompt_, correct_);
  double loss = -correct.logprob;
  grad = correct.grad;
  for (double& g : grad.data) g = -g;

  if (cfg_.lambda > 0.0 && !others_.empty()) {
    size_t n_c = correct_.size();
    double p_c = cfg_.length_normalize
                     ? std::exp(correct.logprob / static_cast<double>(n_c))
                     : std::exp(correct.logprob);
    double dpc_dlogp =
        cfg_.length_normalize ? p_c / static_cast<double>(n_c) : p_c;
    double k = static_cast<double>(others_.size());
    double hinge_sum = 0.0;
    for (const auto& other : others_) {
      LogprobGradient oth =
          model.sequence_logprob_with_gradient(z, prompt_, other);
      size_t n_o = other.size();
      double p_o = cfg_.length_normalize
                       ? std::exp(oth.logprob / static_cast<double>(n_o))
                       : std::exp(oth.logprob);
      if (m_active(p_c, p_o)) {
        hinge_sum += cfg_.margin - p_c + p_o;
        double dpo_dlogp =
            cfg_.length_normalize ? p_o / static_cast<double>(n_o) : p_o;
        double w = cfg_.lambda / k;
        for (size_t i = 0; i < grad.data.size(); ++i)
          grad.data[i] += w * (dpo_dlogp * oth.grad.data[i] -
                               dpc_dlogp * correct.grad.data[i]);
      }
    }
    loss += cfg_.lambda * hinge_sum / k;
  }
  return loss;
}

bool SemanticSeparationObjective::m_active(double p_correct,
                                           double p_other) const {
  // Strict inequality: subgradient 0 at the hinge kink.
  return cfg_.margin - p_correct + p_other > 0.0;
}

}  // namespace saup
