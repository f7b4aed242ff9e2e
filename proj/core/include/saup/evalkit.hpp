#ifndef SAUP_EVALKIT_HPP
#define SAUP_EVALKIT_HPP

#include <map>
#include <string>
#include <vector>

#include "saup/captioner.hpp"
#include "saup/datakit.hpp"
#include "saup/sort.hpp"

namespace saup {

struct EvalReport {
  double overall_asr = 0.0;  // count-weighted mean of per-class ASRs
  std::map<int, double> per_class_asr;
  std::map<int, int> per_class_count;
  std::map<std::string, double> per_trajectory_asr;  // trajectory scenarios only
  // true class -> {matched class id -> count}; key -1 counts predictions that
  // matched no class's target.
  std::map<int, std::map<int, int>> confusion;
  // Per-prompt ASR when evaluating more than one prompt.
  std::map<std::string, double> per_prompt_asr;
  // Rows: classes (sorted); columns: every token of every target in class
  // order, end-of-sequence excluded. Entry = mean teacher-forced probability.
  std::vector<std::vector<double>> token_confidence;
  std::vector<int> token_confidence_classes;
  std::vector<std::string> token_confidence_columns;  // "word(classN)"
  // ASR evaluated on raw delta (normalized path, no quantization) and the
  // deployment-vs-raw gap.
  double raw_delta_asr = 0.0;
  double quantization_gap = 0.0;
  std::string split;  // which split was evaluated
  std::string config_hash;
};

// True iff the sequences are identical after stripping trailing
// end-of-sequence tokens from both. No partial credit.
bool exact_match(const std::vector<int>& prediction,
                 const std::vector<int>& target, int eos_id);

// The deployed evaluation path: x' = apply_pixel(x, delta_pixel, mask), then
// normalize, greedy-decode with budget max-target-length + 2, exact-match.
// Aggregates overall / per-class / per-trajectory / confusion / per-prompt
// numbers plus the raw-delta comparison.
EvalReport evaluate(const PerturbationArtifact& artifact,
                    const AttackDataset& dataset, const Captioner& model,
                    const std::vector<std::string>& prompts, Split split);

// Mean per-token probability each class's perturbed images assign to every
// token of every target, teacher-forced along each target's own prefix.
// Returned matrix matches EvalReport's token-confidence layout.
std::vector<std::vector<double>> token_confidence_matrix(
    const PerturbationArtifact& artifact, const AttackDataset& dataset,
    const Captioner& model, Split split);

}  // namespace saup

#endif  // SAUP_EVALKIT_HPP
