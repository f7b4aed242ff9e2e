#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "saup/artifact_io.hpp"
#include "saup/rng.hpp"

using namespace saup;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  fs::path dir = fs::temp_directory_path() / "saup_artifact_io_tests";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

PerturbationArtifact sample_artifact() {
  Rng rng(33);
  ImageTensor dp(3, 8, 8);
  for (double& v : dp.values.data) v = rng.uniform();
  dp = quantize_to_8bit(dp);

  NormalizationSpec spec;
  spec.mean = {0.48145466, 0.4578275, 0.40821073};  // deliberately awkward
  spec.std = {0.26862954, 0.26130258, 0.27577711};
  spec.input_height = 8;
  spec.input_width = 8;

  PerturbationArtifact a;
  a.delta_pixel = dp;
  a.delta_normalized = normalize(dp, spec);
  a.mask_spec = MaskSpec{MaskShape::kCorner, 20};
  a.normalization = spec;
  a.targets = {{0, "quartz"}, {1, "raven saddle"}, {7, "tulip"}};
  a.config.epochs = 123;
  a.config.learning_rate = 0.007;
  a.config.momentum = 0.85;
  a.config.loss.lambda = 1.5;
  a.config.loss.margin = 0.4;
  a.config.loss.length_normalize = true;
  a.config.seed = 0xdeadbeefcafe1234ull;
  a.config.mask = a.mask_spec;
  a.config.space = OptimizationSpace::kPixel;
  a.config.batch = 4;
  a.config.normalize_gradient = false;
  a.config.per_example_trace = true;
  a.loss_trace = {3.14159265358979, 2.5, 1.0 / 3.0};
  a.model_reference = "runs/toy/weights.bin";
  a.model_weights_hash = 0x0123456789abcdefull;
  a.config_hash = "fedcba9876543210";
  a.recorded_train_asr = 0.9375;
  return a;
}

EvalReport sample_report() {
  EvalReport r;
  r.overall_asr = 0.65;
  r.per_class_asr = {{0, 0.7}, {1, 0.6}};
  r.per_class_count = {{0, 10}, {1, 10}};
  r.per_trajectory_asr = {{"t0", 0.5}, {"t1", 0.8}};
  r.confusion = {{0, {{0, 7}, {1, 2}, {-1, 1}}}, {1, {{1, 6}, {-1, 4}}}};
  r.per_prompt_asr = {{"describe this image", 0.7},
                      {"what is in the picture", 0.6}};
  r.token_confidence = {{0.9, 0.1}, {0.2, 0.8}};
  r.token_confidence_classes = {0, 1};
  r.token_confidence_columns = {"quartz(class0)", "raven(class1)"};
  r.raw_delta_asr = 0.7;
  r.quantization_gap = 0.05;
  r.split = "test";
  r.config_hash = "fedcba9876543210";
  return r;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("artifact survives a lossless byte round trip") {
  fs::path dir = scratch_dir();
  fs::path p1 = dir / "artifact.json";
  fs::path p2 = dir / "artifact_again.json";
  PerturbationArtifact a = sample_artifact();

  save_artifact(a, p1.string());
  PerturbationArtifact b = load_artifact(p1.string());

  CHECK(b.delta_normalized.values.data == a.delta_normalized.values.data);
  CHECK(b.delta_normalized.lower_bound == a.delta_normalized.lower_bound);
  CHECK(b.delta_normalized.upper_bound == a.delta_normalized.upper_bound);
  CHECK(b.delta_pixel.values.data == a.delta_pixel.values.data);
  CHECK(b.targets == a.targets);
  CHECK(b.mask_spec.shape == a.mask_spec.shape);
  CHECK(b.mask_spec.reference_width == a.mask_spec.reference_width);
  CHECK(b.normalization.mean == a.normalization.mean);
  CHECK(b.normalization.std == a.normalization.std);
  CHECK(b.loss_trace == a.loss_trace);
  CHECK(b.model_reference == a.model_reference);
  CHECK(b.model_weights_hash == a.model_weights_hash);
  CHECK(b.config_hash == a.config_hash);
  CHECK(b.recorded_train_asr == a.recorded_train_asr);
  CHECK(b.config.epochs == a.config.epochs);
  CHECK(b.config.learning_rate == a.config.learning_rate);
  CHECK(b.config.momentum == a.config.momentum);
  CHECK(b.config.loss.lambda == a.config.loss.lambda);
  CHECK(b.config.loss.margin == a.config.loss.margin);
  CHECK(b.config.loss.length_normalize == a.config.loss.length_normalize);
  CHECK(b.config.seed == a.config.seed);
  CHECK(b.config.mask.shape == a.config.mask.shape);
  CHECK(b.config.space == a.config.space);
  CHECK(b.config.batch == a.config.batch);
  CHECK(b.config.normalize_gradient == a.config.normalize_gradient);
  CHECK(b.config.per_example_trace == a.config.per_example_trace);

  // Canonical form: load-then-save reproduces the bytes exactly.
  save_artifact(b, p2.string());
  CHECK(read_bytes(p1) == read_bytes(p2));
  CHECK(artifact_to_json(a) == artifact_to_json(b));
  fs::remove_all(dir);
}

TEST_CASE("report survives a lossless byte round trip") {
  fs::path dir = scratch_dir();
  fs::path p1 = dir / "report.json";
  fs::path p2 = dir / "report_again.json";
  EvalReport r = sample_report();

  save_report(r, p1.string());
  EvalReport s = load_report(p1.string());
  CHECK(s.overall_asr == r.overall_asr);
  CHECK(s.per_class_asr == r.per_class_asr);
  CHECK(s.per_class_count == r.per_class_count);
  CHECK(s.per_trajectory_asr == r.per_trajectory_asr);
  CHECK(s.confusion == r.confusion);
  CHECK(s.per_prompt_asr == r.per_prompt_asr);
  CHECK(s.token_confidence == r.token_confidence);
  CHECK(s.token_confidence_classes == r.token_confidence_classes);
  CHECK(s.token_confidence_columns == r.token_confidence_columns);
  CHECK(s.raw_delta_asr == r.raw_delta_asr);
  CHECK(s.quantization_gap == r.quantization_gap);
  CHECK(s.split == r.split);
  CHECK(s.config_hash == r.config_hash);

  save_report(s, p2.string());
  CHECK(read_bytes(p1) == read_bytes(p2));
  fs::remove_all(dir);
}

TEST_CASE("serialization is deterministic") {
  PerturbationArtifact a = sample_artifact();
  CHECK(artifact_to_json(a) == artifact_to_json(a));
  EvalReport r = sample_report();
  CHECK(report_to_json(r) == report_to_json(r));
  // The pixel delta is stored on the 8-bit grid as integers.
  CHECK(artifact_to_json(a).find("values_8bit") != std::string::npos);
}

TEST_CASE("atomic writes leave no temporary and create parents") {
  fs::path dir = scratch_dir();
  fs::path nested = dir / "a" / "b" / "artifact.json";
  save_artifact(sample_artifact(), nested.string());
  CHECK(fs::exists(nested));
  CHECK_FALSE(fs::exists(nested.string() + ".tmp"));
  // Overwrite in place works too.
  save_artifact(sample_artifact(), nested.string());
  CHECK(fs::exists(nested));
  CHECK_FALSE(fs::exists(nested.string() + ".tmp"));
  fs::remove_all(dir);
}

TEST_CASE("malformed artifact files raise schema errors") {
  fs::path dir = scratch_dir();

  fs::path not_json = dir / "not_json.json";
  {
    std::ofstream out(not_json);
    out << "{broken";
  }
  CHECK_THROWS_AS(load_artifact(not_json.string()), SchemaError);
  CHECK_THROWS_AS(load_report(not_json.string()), SchemaError);

  fs::path missing_field = dir / "missing_field.json";
  {
    std::ofstream out(missing_field);
    out << "{\"schema_version\": 1}\n";
  }
  CHECK_THROWS_AS(load_artifact(missing_field.string()), SchemaError);
  CHECK_THROWS_AS(load_report(missing_field.string()), SchemaError);

  // Unsupported version.
  PerturbationArtifact a = sample_artifact();
  std::string doc = artifact_to_json(a);
  fs::path bad_version = dir / "bad_version.json";
  {
    std::string bumped = doc;
    size_t pos = bumped.find("\"schema_version\": 1");
    REQUIRE(pos != std::string::npos);
    bumped.replace(pos, 19, "\"schema_version\": 9");
    std::ofstream out(bad_version);
    out << bumped;
  }
  CHECK_THROWS_AS(load_artifact(bad_version.string()), SchemaError);

  // Corrupted byte grid: wrong entry count.
  fs::path short_grid = dir / "short_grid.json";
  {
    std::string cut = doc;
    size_t pos = cut.find("\"values_8bit\": [");
    REQUIRE(pos != std::string::npos);
    size_t first = cut.find(',', pos);
    size_t second = cut.find(',', first + 1);
    cut.erase(first, second - first);  // drop one entry
    std::ofstream out(short_grid);
    out << cut;
  }
  CHECK_THROWS_AS(load_artifact(short_grid.string()), SchemaError);

  CHECK_THROWS_AS(load_artifact((dir / "absent.json").string()), IoError);
  CHECK_THROWS_AS(load_report((dir / "absent.json").string()), IoError);
  fs::remove_all(dir);
}
