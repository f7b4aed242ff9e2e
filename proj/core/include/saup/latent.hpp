#ifndef SAUP_LATENT_HPP
#define SAUP_LATENT_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "saup/captioner.hpp"
#include "saup/datakit.hpp"
#include "saup/sort.hpp"

namespace saup {

enum class FeatureKind { kClean, kPerturbed, kAnchor };

// Penultimate features for every clean image, every perturbed image, and the
// all-zero-image + delta anchor, with their labels. Perturbed model inputs
// are kept so target-probability analyses can rerun the decoder.
struct FeatureStudy {
  Eigen::MatrixXd features;  // rows: 2*|split| + 1
  std::vector<FeatureKind> kinds;
  std::vector<int> class_labels;  // -1 for the anchor row
  int anchor_row = -1;
  std::vector<NormalizedTensor> perturbed_inputs;  // parallel to perturbed rows
  std::vector<std::vector<int>> perturbed_prompts;
  std::vector<int> perturbed_rows;  // row index per input
  std::vector<int> class_ids;       // sorted ids present
};

struct PcaResult {
  Eigen::MatrixXd basis;        // dim x k, columns orthonormal
  Eigen::MatrixXd projections;  // n x k
  Eigen::VectorXd mean;         // dim
  std::vector<double> explained_variance_ratio;  // nonincreasing, per column
};

struct SeparationMetrics {
  double perturbed_silhouette = 0.0;  // class labels over perturbed features
  double clean_perturbed_centroid_distance = 0.0;
  double anchor_to_perturbed_centroid = 0.0;
  double anchor_to_clean_centroid = 0.0;
};

FeatureStudy collect_features(const AttackDataset& dataset,
                              const PerturbationArtifact& artifact,
                              const Captioner& model, Split split,
                              const std::string& prompt);

// Centered PCA via eigen-decomposition of the covariance. Deterministic sign:
// each component's largest-magnitude coordinate is positive. Degenerate
// covariance is rank-truncated (k shrinks; check basis.cols()).
PcaResult pca(const Eigen::MatrixXd& features, int k);

// Mean silhouette over all points; singleton clusters and 0/0 divisions
// score 0 by convention.
double silhouette_score(const Eigen::MatrixXd& points,
                        const std::vector<int>& labels);

SeparationMetrics separation_metrics(const FeatureStudy& study);

// [class x target] mean sequence probability of every target over the
// perturbed images of every class. Row/column order: sorted class ids.
Eigen::MatrixXd alignment_matrix(const FeatureStudy& study,
                                 const PerturbationArtifact& artifact,
                                 const Captioner& model);

}  // namespace saup

#endif  // SAUP_LATENT_HPP
