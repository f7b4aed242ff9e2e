#include "saup/evalkit.hpp"

#include <algorithm>
#include <cmath>

#include "saup/masks.hpp"
#include "saup/tokenizer.hpp"

namespace saup {

bool exact_match(const std::vector<int>& prediction,
                 const std::vector<int>& target, int eos_id) {
  auto stripped_size = [eos_id](const std::vector<int>& seq) {
    size_t n = seq.size();
    while (n > 0 && seq[n - 1] == eos_id) --n;
    return n;
  };
  size_t np = stripped_size(prediction), nt = stripped_size(target);
  if (np != nt) return false;
  for (size_t i = 0; i < np; ++i)
    if (prediction[i] != target[i]) return false;
  return true;
}

namespace {

// Tokenized artifact targets (end-of-sequence appended), checked against the
// dataset's classes.
std::map<int, std::vector<int>> artifact_targets(
    const PerturbationArtifact& artifact, const AttackDataset& dataset,
    int eos_id) {
  std::map<int, std::vector<int>> out;
  for (const auto& [cls, target] : artifact.targets) {
    std::vector<int> ids = tokenizer().encode(target);
    ids.push_back(eos_id);
    out[cls] = ids;
  }
  for (const auto& e : dataset.entries)
    if (!out.count(e.class_id))
      throw ConfigError("dataset class " + std::to_string(e.class_id) +
                        " is missing from the artifact target map");
  return out;
}

int generation_budget(const std::map<int, std::vector<int>>& targets,
                      int eos_id) {
  // Longest target (terminator excluded) plus room to observe trailing
  // garbage, which must count as a miss.
  size_t longest = 0;
  for (const auto& [cls, ids] : targets) {
    size_t n = ids.size();
    while (n > 0 && ids[n - 1] == eos_id) --n;
    longest = std::max(longest, n);
  }
  return static_cast<int>(longest) + 2;
}

struct PreparedEval {
  Mask mask;
  std::map<int, std::vector<int>> targets;
  int max_len = 0;
};

PreparedEval prepare_eval(const PerturbationArtifact& artifact,
                          const AttackDataset& dataset,
                          const Captioner& model) {
  PreparedEval p;
  p.mask = make_mask(artifact.mask_spec, model.input_channels(),
                     model.input_height(), model.input_width());
  p.targets = artifact_targets(artifact, dataset, model.eos_id());
  p.max_len = generation_budget(p.targets, model.eos_id());
  return p;
}

// The deployed rendering: resize, overwrite the masked region with the 8-bit
// delta, then normalize.
NormalizedTensor perturbed_input_pixel(const DatasetEntry& e,
                                       const PerturbationArtifact& artifact,
                                       const Captioner& model, const Mask& mask) {
  ImageTensor x =
      resize_to_model(e.image, model.input_height(), model.input_width());
  ImageTensor x_adv =
      apply_masked_perturbation_pixel(x, artifact.delta_pixel.values, mask);
  return normalize(x_adv, artifact.normalization);
}

// The raw-delta shortcut: same image but the unquantized normalized delta.
NormalizedTensor perturbed_input_raw(const DatasetEntry& e,
                                     const PerturbationArtifact& artifact,
                                     const Captioner& model, const Mask& mask) {
  ImageTensor x =
      resize_to_model(e.image, model.input_height(), model.input_width());
  NormalizedTensor z = normalize(x, artifact.normalization);
  return apply_masked_perturbation(z, artifact.delta_normalized.values, mask);
}

}  // namespace

std::vector<std::vector<double>> token_confidence_matrix(
    const PerturbationArtifact& artifact, const AttackDataset& dataset,
    const Captioner& model, Split split) {
  PreparedEval p = prepare_eval(artifact, dataset, model);
  std::vector<int> classes = dataset.class_ids();
  int eos = model.eos_id();

  // Column layout: every non-terminator token of every target, class order.
  std::vector<std::pair<int, size_t>> columns;  // (target class, token index)
  for (int cls : classes) {
    const auto& ids = p.targets.at(cls);
    for (size_t i = 0; i < ids.size(); ++i)
      if (ids[i] != eos) columns.emplace_back(cls, i);
  }

  std::vector<std::vector<double>> matrix(
      classes.size(), std::vector<double>(columns.size(), 0.0));
  for (size_t r = 0; r < classes.size(); ++r) {
    int count = 0;
    for (const auto& e : dataset.entries) {
      if (e.class_id != classes[r] || e.split != split) continue;
      ++count;
      NormalizedTensor z = perturbed_input_pixel(e, artifact, model, p.mask);
      std::vector<int> prompt = tokenizer().encode(e.prompt);
      for (int cls : classes) {
        std::vector<double> lps = model.token_logprobs(z, prompt, p.targets.at(cls));
        size_t col = 0;
        for (size_t k = 0; k < columns.size(); ++k)
          if (columns[k].first == cls) { col = k; break; }
        for (size_t i = 0, j = 0; i < p.targets.at(cls).size(); ++i) {
          if (p.targets.at(cls)[i] == eos) continue;
          matrix[r][col + j] += std::exp(lps[i]);
          ++j;
        }
      }
    }
    if (count > 0)
      for (double& v : matrix[r]) v /= count;
  }
  return matrix;
}

EvalReport evaluate(const PerturbationArtifact& artifact,
                    const AttackDataset& dataset, const Captioner& model,
                    const std::vector<std::string>& prompts, Split split) {
  PreparedEval p = prepare_eval(artifact, dataset, model);
  int eos = model.eos_id();

  EvalReport report;
  report.split = to_string(split);
  report.config_hash = artifact.config_hash;

  std::map<int, int> class_hits;
  std::map<std::string, int> traj_hits, traj_counts;
  std::map<std::string, int> prompt_hits, prompt_counts;
  int total = 0, hits = 0, raw_hits = 0;

  for (const auto& e : dataset.entries) {
    if (e.split != split) continue;
    NormalizedTensor z_pix = perturbed_input_pixel(e, artifact, model, p.mask);
    NormalizedTensor z_raw = perturbed_input_raw(e, artifact, model, p.mask);
    const std::vector<int>& target = p.targets.at(e.class_id);

    std::vector<std::string> prompt_texts =
        prompts.empty() ? std::vector<std::string>{e.prompt} : prompts;
    for (const std::string& prompt_text : prompt_texts) {
      std::vector<int> prompt = tokenizer().encode(prompt_text);
      std::vector<int> pred = model.greedy_decode(z_pix, prompt, p.max_len);
      bool ok = exact_match(pred, target, eos);

      ++total;
      ++report.per_class_count[e.class_id];
      ++prompt_counts[prompt_text];
      if (ok) {
        ++hits;
        ++class_hits[e.class_id];
        ++prompt_hits[prompt_text];
      }
      if (!e.trajectory_id.empty()) {
        ++traj_counts[e.trajectory_id];
        traj_hits[e.trajectory_id] += ok ? 1 : 0;
      }

      int matched = -1;
      for (const auto& [cls, ids] : p.targets)
        if (exact_match(pred, ids, eos)) {
          matched = cls;
          break;
        }
      ++report.confusion[e.class_id][matched];

      if (exact_match(model.greedy_decode(z_raw, prompt, p.max_len), target,
                      eos))
        ++raw_hits;
    }
  }
  if (total == 0) throw InputError("no entries in the requested split");

  report.overall_asr = static_cast<double>(hits) / total;
  report.raw_delta_asr = static_cast<double>(raw_hits) / total;
  report.quantization_gap =
      std::abs(report.overall_asr - report.raw_delta_asr);
  for (const auto& [cls, count] : report.per_class_count)
    report.per_class_asr[cls] = static_cast<double>(class_hits[cls]) / count;
  for (const auto& [traj, count] : traj_counts)
    report.per_trajectory_asr[traj] =
        static_cast<double>(traj_hits[traj]) / count;
  if (prompts.size() > 1)
    for (const auto& [text, count] : prompt_counts)
      report.per_prompt_asr[text] =
          static_cast<double>(prompt_hits[text]) / count;

  report.token_confidence = token_confidence_matrix(artifact, dataset, model, split);
  report.token_confidence_classes = dataset.class_ids();
  for (int cls : report.token_confidence_classes) {
    const auto& ids = p.targets.at(cls);
    for (int id : ids)
      if (id != eos)
        report.token_confidence_columns.push_back(
            tokenizer().word(id) + "(class" + std::to_string(cls) + ")");
  }
  return report;
}

}  // namespace saup
