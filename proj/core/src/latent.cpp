#include "saup/latent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "saup/masks.hpp"
#include "saup/tokenizer.hpp"

namespace saup {

namespace {

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

}  // namespace

FeatureStudy collect_features(const AttackDataset& dataset,
                              const PerturbationArtifact& artifact,
                              const Captioner& model, Split split,
                              const std::string& prompt) {
  Mask mask = make_mask(artifact.mask_spec, model.input_channels(),
                        model.input_height(), model.input_width());
  std::vector<const DatasetEntry*> entries = dataset.split_entries(split);
  if (entries.empty()) throw InputError("no entries in the requested split");

  auto prompt_ids = [&](const DatasetEntry& e) {
    return tokenizer().encode(prompt.empty() ? e.prompt : prompt);
  };

  FeatureStudy study;
  size_t n = entries.size();
  study.features.resize(2 * n + 1, model.feature_dim());
  std::set<int> classes;

  // Clean rows first, then perturbed rows, anchor last.
  for (size_t i = 0; i < n; ++i) {
    const DatasetEntry& e = *entries[i];
    classes.insert(e.class_id);
    ImageTensor x =
        resize_to_model(e.image, model.input_height(), model.input_width());
    NormalizedTensor z = normalize(x, artifact.normalization);
    study.features.row(static_cast<Eigen::Index>(i)) =
        to_eigen(model.penultimate_features(z, prompt_ids(e))).transpose();
    study.kinds.push_back(FeatureKind::kClean);
    study.class_labels.push_back(e.class_id);
  }
  for (size_t i = 0; i < n; ++i) {
    const DatasetEntry& e = *entries[i];
    ImageTensor x =
        resize_to_model(e.image, model.input_height(), model.input_width());
    ImageTensor x_adv =
        apply_masked_perturbation_pixel(x, artifact.delta_pixel.values, mask);
    NormalizedTensor z = normalize(x_adv, artifact.normalization);
    std::vector<int> pids = prompt_ids(e);
    study.features.row(static_cast<Eigen::Index>(n + i)) =
        to_eigen(model.penultimate_features(z, pids)).transpose();
    study.kinds.push_back(FeatureKind::kPerturbed);
    study.class_labels.push_back(e.class_id);
    study.perturbed_inputs.push_back(z);
    study.perturbed_prompts.push_back(std::move(pids));
    study.perturbed_rows.push_back(static_cast<int>(n + i));
  }

  // Anchor: the perturbation alone on an all-zero image.
  ImageTensor zero(model.input_channels(), model.input_height(),
                   model.input_width(), 0.0);
  ImageTensor anchor_img =
      apply_masked_perturbation_pixel(zero, artifact.delta_pixel.values, mask);
  NormalizedTensor anchor_z = normalize(anchor_img, artifact.normalization);
  study.features.row(static_cast<Eigen::Index>(2 * n)) =
      to_eigen(model.penultimate_features(anchor_z, prompt_ids(*entries[0])))
          .transpose();
  study.kinds.push_back(FeatureKind::kAnchor);
  study.class_labels.push_back(-1);
  study.anchor_row = static_cast<int>(2 * n);
  study.class_ids.assign(classes.begin(), classes.end());
  return study;
}

PcaResult pca(const Eigen::MatrixXd& features, int k) {
  Eigen::Index n = features.rows(), d = features.cols();
  if (n < 2) throw InputError("pca needs at least 2 samples");
  if (k < 1 || k > d)
    throw DimensionError("pca: k = " + std::to_string(k) +
                         " outside [1," + std::to_string(d) + "]");

  PcaResult r;
  r.mean = features.colwise().mean();
  Eigen::MatrixXd centered = features.rowwise() - r.mean.transpose();
  Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw NumericalError("pca: eigen-decomposition failed");
  Eigen::VectorXd evals = solver.eigenvalues();  // ascending
  Eigen::MatrixXd evecs = solver.eigenvectors();

  double total = 0.0, max_ev = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (evals[i] > 0.0) total += evals[i];
    max_ev = std::max(max_ev, evals[i]);
  }
  // Rank truncation: drop numerically-zero directions.
  double tol = max_ev * 1e-12;

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = d - 1; i >= 0 && static_cast<int>(keep.size()) < k; --i)
    if (evals[i] > tol) keep.push_back(i);
  if (keep.empty()) throw NumericalError("pca: covariance has no rank");

  r.basis.resize(d, static_cast<Eigen::Index>(keep.size()));
  for (size_t j = 0; j < keep.size(); ++j) {
    Eigen::VectorXd v = evecs.col(keep[j]);
    // Deterministic sign: the largest-magnitude coordinate is positive.
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < d; ++i)
      if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    if (v[arg] < 0.0) v = -v;
    r.basis.col(static_cast<Eigen::Index>(j)) = v;
    r.explained_variance_ratio.push_back(total > 0.0 ? evals[keep[j]] / total
                                                     : 0.0);
  }
  r.projections = centered * r.basis;
  return r;
}

double silhouette_score(const Eigen::MatrixXd& points,
                        const std::vector<int>& labels) {
  Eigen::Index n = points.rows();
  if (static_cast<size_t>(n) != labels.size())
    throw DimensionError("silhouette: labels do not match points");
  if (n == 0) throw InputError("silhouette: no points");

  std::set<int> clusters(labels.begin(), labels.end());
  if (clusters.size() < 2)
    throw InputError("silhouette needs at least 2 clusters");

  Eigen::MatrixXd dist(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      dist(i, j) = (points.row(i) - points.row(j)).norm();

  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double a = 0.0;
    int same = 0;
    std::map<int, std::pair<double, int>> other;  // cluster -> (sum, count)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      if (labels[j] == labels[i]) {
        a += dist(i, j);
        ++same;
      } else {
        other[labels[j]].first += dist(i, j);
        other[labels[j]].second += 1;
      }
    }
    if (same == 0) continue;  // singleton scores 0 by convention
    a /= same;
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [cluster, acc] : other)
      b = std::min(b, acc.first / acc.second);
    double m = std::max(a, b);
    sum += m > 0.0 ? (b - a) / m : 0.0;  // identical points score 0
  }
  return sum / static_cast<double>(n);
}

SeparationMetrics separation_metrics(const FeatureStudy& study) {
  if (study.class_ids.size() < 2)
    throw InputError("separation metrics need at least 2 classes");
  if (study.anchor_row < 0) throw InputError("study has no anchor row");

  Eigen::Index dim = study.features.cols();
  Eigen::VectorXd clean_centroid = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd pert_centroid = Eigen::VectorXd::Zero(dim);
  int clean_n = 0, pert_n = 0;
  std::vector<Eigen::Index> pert_rows;
  for (size_t i = 0; i < study.kinds.size(); ++i) {
    if (study.kinds[i] == FeatureKind::kClean) {
      clean_centroid += study.features.row(static_cast<Eigen::Index>(i));
      ++clean_n;
    } else if (study.kinds[i] == FeatureKind::kPerturbed) {
      pert_centroid += study.features.row(static_cast<Eigen::Index>(i));
      ++pert_n;
      pert_rows.push_back(static_cast<Eigen::Index>(i));
    }
  }
  if (clean_n == 0 || pert_n == 0)
    throw InputError("study is missing clean or perturbed rows");
  clean_centroid /= clean_n;
  pert_centroid /= pert_n;

  Eigen::MatrixXd pert(pert_rows.size(), dim);
  std::vector<int> pert_labels;
  for (size_t i = 0; i < pert_rows.size(); ++i) {
    pert.row(static_cast<Eigen::Index>(i)) = study.features.row(pert_rows[i]);
    pert_labels.push_back(study.class_labels[pert_rows[i]]);
  }

  Eigen::VectorXd anchor = study.features.row(study.anchor_row);
  SeparationMetrics m;
  m.perturbed_silhouette = silhouette_score(pert, pert_labels);
  m.clean_perturbed_centroid_distance = (clean_centroid - pert_centroid).norm();
  m.anchor_to_perturbed_centroid = (anchor - pert_centroid).norm();
  m.anchor_to_clean_centroid = (anchor - clean_centroid).norm();
  return m;
}

Eigen::MatrixXd alignment_matrix(const FeatureStudy& study,
                                 const PerturbationArtifact& artifact,
                                 const Captioner& model) {
  if (study.perturbed_inputs.empty())
    throw InputError("study has no perturbed inputs");
  const std::vector<int>& classes = study.class_ids;

  std::map<int, std::vector<int>> targets;
  for (int cls : classes) {
    auto it = artifact.targets.find(cls);
    if (it == artifact.targets.end())
      throw ConfigError("class " + std::to_string(cls) +
                        " is missing from the artifact target map");
    std::vector<int> ids = tokenizer().encode(it->second);
    ids.push_back(model.eos_id());
    targets[cls] = ids;
  }

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(classes.size()),
      static_cast<Eigen::Index>(classes.size()));
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(
      static_cast<Eigen::Index>(classes.size()));
  for (size_t i = 0; i < study.perturbed_inputs.size(); ++i) {
    int label = study.class_labels[study.perturbed_rows[i]];
    auto row_it = std::find(classes.begin(), classes.end(), label);
    if (row_it == classes.end()) continue;
    Eigen::Index row = row_it - classes.begin();
    counts[row] += 1.0;
    for (size_t c = 0; c < classes.size(); ++c)
      m(row, static_cast<Eigen::Index>(c)) += std::exp(sequence_logprob(
          model, study.perturbed_inputs[i], study.perturbed_prompts[i],
          targets.at(classes[c])));
  }
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    if (counts[r] > 0.0) m.row(r) /= counts[r];
  return m;
}

}  // namespace saup
