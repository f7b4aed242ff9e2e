#ifndef SAUP_CAPTIONER_HPP
#define SAUP_CAPTIONER_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "saup/rng.hpp"
#include "saup/tensor.hpp"
#include "saup/tokenizer.hpp"

namespace saup {

// Sequence log-probability together with its gradient w.r.t. the normalized
// image. This is the one differentiation primitive every loss builds on.
struct LogprobGradient {
  double logprob = 0.0;
  Tensor3 grad;  // d logprob / d z, shaped like the input
};

// Differentiable captioner contract: deterministic forward passes over a
// normalized image + prompt, with input gradients of sequence log-probability.
class Captioner {
 public:
  virtual ~Captioner() = default;

  virtual int vocab_size() const = 0;
  virtual int eos_id() const = 0;
  virtual int input_channels() const = 0;
  virtual int input_height() const = 0;
  virtual int input_width() const = 0;
  virtual int feature_dim() const = 0;
  virtual const NormalizationSpec& normalization() const = 0;

  // Entry i = log P(t_i | t_<i, z, prompt) under teacher forcing.
  virtual std::vector<double> token_logprobs(
      const NormalizedTensor& z, const std::vector<int>& prompt,
      const std::vector<int>& target) const = 0;

  // Sum of token_logprobs plus d(sum)/dz via backprop through time.
  virtual LogprobGradient sequence_logprob_with_gradient(
      const NormalizedTensor& z, const std::vector<int>& prompt,
      const std::vector<int>& target) const = 0;

  // Argmax decoding, ties broken by lowest token id; stops at eos or max_len.
  virtual std::vector<int> greedy_decode(const NormalizedTensor& z,
                                         const std::vector<int>& prompt,
                                         int max_len) const = 0;

  // Pre-logit state conditioned on image + prompt only (before any target
  // token is consumed).
  virtual std::vector<double> penultimate_features(
      const NormalizedTensor& z, const std::vector<int>& prompt) const = 0;
};

// Scalar sum of per-token log-probs; computed in log domain throughout.
double sequence_logprob(const Captioner& model, const NormalizedTensor& z,
                        const std::vector<int>& prompt,
                        const std::vector<int>& target);

// A differentiable scalar objective of the normalized image. Losses implement
// this so the optimizer and the gradient checker can stay loss-agnostic.
class ImageObjective {
 public:
  virtual ~ImageObjective() = default;
  virtual double value(const Captioner& model, const NormalizedTensor& z) const = 0;
  virtual Tensor3 gradient(const Captioner& model, const NormalizedTensor& z) const = 0;
};

// objective.gradient with a finiteness check; throws NumericalError with the
// offending index if any entry is NaN/inf.
Tensor3 image_gradient(const Captioner& model, const ImageObjective& objective,
                       const NormalizedTensor& z);

// One (image, prompt, caption) pretraining example; caption ends with eos.
struct SupervisedExample {
  NormalizedTensor image;
  std::vector<int> prompt;
  std::vector<int> caption;
};

struct PretrainConfig {
  int epochs = 60;
  double learning_rate = 0.05;
  uint64_t seed = 0;  // governs example shuffling only
};

// Small seedable captioner: patch-mean encoder -> gated feature -> single-layer
// recurrent decoder with learned token embeddings.
//
//   pool  = per-channel 2x2 patch means of z                     (768)
//   h     = tanh(W_enc pool + b_enc)
//           .* sigmoid(W_gate pool + b_gate)                     (64)
//   q     = mean of embed[prompt tokens] (0 if empty)            (16)
//   s_1   = tanh(W_img h + W_prompt q + b_state)                 (64)
//   s_i+1 = tanh(W_rec s_i + W_tok embed[t_i] + b_rec)           (64)
//   logit_i = W_out s_i + b_out                                  (64)
//
// The gate makes the encoder bilinear in the patch means, so distinct image
// regions can modulate each other's contribution (a minimal stand-in for
// attention-style token interactions).
//
// penultimate_features returns s_1.
class ToyCaptioner : public Captioner {
 public:
  static constexpr int kChannels = 3;
  static constexpr int kInputSize = 32;
  static constexpr int kPatch = 2;
  static constexpr int kPoolDim =
      kChannels * (kInputSize / kPatch) * (kInputSize / kPatch);  // 768
  static constexpr int kFeatureDim = 64;
  static constexpr int kEmbedDim = 16;
  static constexpr int kMaxSequence = 256;

  explicit ToyCaptioner(uint64_t seed);

  int vocab_size() const override { return Tokenizer::kVocabSize; }
  int eos_id() const override { return Tokenizer::kEosId; }
  int input_channels() const override { return kChannels; }
  int input_height() const override { return kInputSize; }
  int input_width() const override { return kInputSize; }
  int feature_dim() const override { return kFeatureDim; }
  const NormalizationSpec& normalization() const override { return norm_; }

  std::vector<double> token_logprobs(const NormalizedTensor& z,
                                     const std::vector<int>& prompt,
                                     const std::vector<int>& target) const override;
  LogprobGradient sequence_logprob_with_gradient(
      const NormalizedTensor& z, const std::vector<int>& prompt,
      const std::vector<int>& target) const override;
  std::vector<int> greedy_decode(const NormalizedTensor& z,
                                 const std::vector<int>& prompt,
                                 int max_len) const override;
  std::vector<double> penultimate_features(
      const NormalizedTensor& z, const std::vector<int>& prompt) const override;

  // Teacher-forced cross-entropy SGD over the examples; returns the mean
  // epoch losses. Mutates weights; single-threaded by contract.
  std::vector<double> pretrain(const std::vector<SupervisedExample>& examples,
                               const PretrainConfig& cfg);

  // Versioned binary weight blob.
  void save_weights(const std::string& path) const;
  static ToyCaptioner load_weights(const std::string& path);

  // FNV-1a over the serialized weight bytes; artifacts store this to pin the
  // exact model a perturbation was trained against.
  uint64_t weights_hash() const;

  uint64_t init_seed() const { return init_seed_; }

 private:
  ToyCaptioner() = default;

  struct States;  // forward pass scratch, defined in the .cpp
  States run_forward(const NormalizedTensor& z, const std::vector<int>& prompt,
                     const std::vector<int>& target) const;
  void check_tokens(const std::vector<int>& ids, bool allow_empty) const;

  NormalizationSpec norm_;
  uint64_t init_seed_ = 0;

  Eigen::MatrixXd w_enc_;     // kFeatureDim x kPoolDim
  Eigen::VectorXd b_enc_;     // kFeatureDim
  Eigen::MatrixXd w_gate_;    // kFeatureDim x kPoolDim
  Eigen::VectorXd b_gate_;    // kFeatureDim
  Eigen::MatrixXd embed_;     // vocab x kEmbedDim (row per token)
  Eigen::MatrixXd w_img_;     // kFeatureDim x kFeatureDim
  Eigen::MatrixXd w_prompt_;  // kFeatureDim x kEmbedDim
  Eigen::VectorXd b_state_;   // kFeatureDim
  Eigen::MatrixXd w_rec_;     // kFeatureDim x kFeatureDim
  Eigen::MatrixXd w_tok_;     // kFeatureDim x kEmbedDim
  Eigen::VectorXd b_rec_;     // kFeatureDim
  Eigen::MatrixXd w_out_;     // vocab x kFeatureDim
  Eigen::VectorXd b_out_;     // vocab

  friend class ToyCaptionerTestAccess;
};

// Test hook: lets oracles overwrite specific weights (e.g. rig the decoder to
// uniform logits) without widening the public surface.
class ToyCaptionerTestAccess {
 public:
  explicit ToyCaptionerTestAccess(ToyCaptioner& m) : m_(m) {}
  Eigen::MatrixXd& w_enc() { return m_.w_enc_; }
  Eigen::VectorXd& b_enc() { return m_.b_enc_; }
  Eigen::MatrixXd& w_gate() { return m_.w_gate_; }
  Eigen::VectorXd& b_gate() { return m_.b_gate_; }
  Eigen::MatrixXd& embed() { return m_.embed_; }
  Eigen::MatrixXd& w_img() { return m_.w_img_; }
  Eigen::MatrixXd& w_prompt() { return m_.w_prompt_; }
  Eigen::VectorXd& b_state() { return m_.b_state_; }
  Eigen::MatrixXd& w_rec() { return m_.w_rec_; }
  Eigen::MatrixXd& w_tok() { return m_.w_tok_; }
  Eigen::VectorXd& b_rec() { return m_.b_rec_; }
  Eigen::MatrixXd& w_out() { return m_.w_out_; }
  Eigen::VectorXd& b_out() { return m_.b_out_; }

 private:
  ToyCaptioner& m_;
};

}  // namespace saup

#endif  // SAUP_CAPTIONER_HPP
