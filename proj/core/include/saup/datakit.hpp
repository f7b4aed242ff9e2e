#ifndef SAUP_DATAKIT_HPP
#define SAUP_DATAKIT_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "saup/tensor.hpp"

namespace saup {

enum class Scenario { kSynthetic, kImageNet, kAutoDriving, kRoboTasking };
enum class Split { kTrain, kTest };

Scenario scenario_from_string(const std::string& name);
std::string to_string(Scenario s);
std::string to_string(Split s);

struct DatasetEntry {
  std::string prompt;     // prompt text fed alongside the image
  std::string image_ref;  // file path or synthetic key; unique per image
  ImageTensor image;      // decoded pixels in [0,1]
  int class_id = 0;
  Split split = Split::kTrain;
  std::string trajectory_id;  // empty outside trajectory scenarios
};

// The attack's working set: (prompt, image, class, split) triples plus the
// class -> target-string map.
struct AttackDataset {
  std::vector<DatasetEntry> entries;
  std::map<int, std::string> targets;  // class id -> target string
  Scenario scenario = Scenario::kSynthetic;

  // Enforces: every class has >= 1 train entry (and >= 1 test entry unless
  // require_test is false); train/test image refs disjoint; target strings
  // pairwise distinct; every entry's class has a target.
  void validate(bool require_test = true) const;

  std::vector<int> class_ids() const;  // sorted, unique
  std::vector<const DatasetEntry*> split_entries(Split split) const;

  // Targets tokenized once, with the end-of-sequence id appended so sequence
  // termination is part of what the attack optimizes and matching checks.
  std::map<int, std::vector<int>> tokenized_targets(int eos_id) const;
};

// ---------------------------------------------------------------------------
// Synthetic toy images

struct SyntheticConfig {
  int classes = 2;
  int per_class = 28;  // train gets 5/7 of these (the 50-train : 20-test ratio)
  int height = 32;
  int width = 32;
  uint64_t seed = 0;
  int words_per_target = 1;
  std::string prompt = "describe this image";
};

// Procedural classes: distinct base hue + per-class stripe/checker/ring
// pattern + per-image jitter and pixel noise. Targets are drawn from the
// vocabulary's target-word slice, pairwise distinct.
AttackDataset generate_synthetic(const SyntheticConfig& cfg);

// ---------------------------------------------------------------------------
// ImageNet-protocol sampler

struct ClassPool {
  struct PoolClass {
    std::string name;  // single vocabulary word
    std::vector<std::string> image_refs;
    std::vector<ImageTensor> images;
  };
  std::vector<PoolClass> classes;
};

// Synthetic stand-in pool for the sampler: pool_classes procedural classes
// with per_class images each, named after vocabulary class words.
ClassPool make_synthetic_pool(int pool_classes, int per_class, int height,
                              int width, uint64_t seed);

// Picks C classes; 50 train + 20 test images per class; each class's target
// drawn uniformly from the names of pool classes outside the chosen C.
AttackDataset sample_imagenet_protocol(const ClassPool& pool, int num_classes,
                                       uint64_t seed,
                                       const std::string& prompt =
                                           "describe this image");

// ---------------------------------------------------------------------------
// Trajectory (RIST-style) manifests

struct ManifestClass {
  int class_id = 0;
  std::string target;
  std::vector<std::string> image_refs;  // exactly 10, paths relative to manifest
};

struct ManifestTrajectory {
  std::string trajectory_id;
  std::string scenario;  // "AutoDriving" (5 classes) or "RoboTasking" (2)
  std::vector<ManifestClass> classes;
};

struct TrajectoryManifest {
  int schema_version = 1;
  std::string prompt = "describe this image";
  std::vector<ManifestTrajectory> trajectories;

  void validate() const;  // schema violations carry the offending field path
};

TrajectoryManifest load_manifest(const std::string& path);
// Canonical serialization: sorted keys, fixed layout. load-then-save of a
// canonically written file is byte-identical.
void save_manifest(const TrajectoryManifest& manifest, const std::string& path);

// Loads the manifest and every referenced image; first five images of each
// class are the train split, the rest test (deterministic without a seed).
AttackDataset load_rist_manifest(const std::string& path);

// ---------------------------------------------------------------------------
// Image plumbing

// Bilinear resize with half-pixel-aligned sample centers; output in [0,1].
ImageTensor resize_to_model(const ImageTensor& image, int height, int width);

// Binary PPM (P6), 8-bit, the repo's on-disk image format.
ImageTensor load_ppm(const std::string& path);
void save_ppm(const ImageTensor& image, const std::string& path);

}  // namespace saup

#endif  // SAUP_DATAKIT_HPP
