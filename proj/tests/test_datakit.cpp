#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "saup/datakit.hpp"
#include "saup/tokenizer.hpp"

using namespace saup;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  fs::path dir = fs::temp_directory_path() / "saup_datakit_tests";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<double> class_mean_rgb(const AttackDataset& ds, int cls) {
  std::vector<double> mean(3, 0.0);
  int count = 0;
  for (const auto& e : ds.entries) {
    if (e.class_id != cls) continue;
    for (int c = 0; c < 3; ++c) {
      double sum = 0.0;
      const Tensor3& t = e.image.values;
      for (int y = 0; y < t.height; ++y)
        for (int x = 0; x < t.width; ++x) sum += t.at(c, y, x);
      mean[c] += sum / (t.height * t.width);
    }
    ++count;
  }
  for (double& v : mean) v /= count;
  return mean;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

TrajectoryManifest small_manifest() {
  TrajectoryManifest m;
  ManifestTrajectory traj;
  traj.trajectory_id = "traj0";
  traj.scenario = "RoboTasking";
  for (int c = 0; c < 2; ++c) {
    ManifestClass cls;
    cls.class_id = c;
    cls.target = c == 0 ? "quartz" : "raven";
    for (int i = 0; i < 10; ++i)
      cls.image_refs.push_back("images/c" + std::to_string(c) + "_" +
                               std::to_string(i) + ".ppm");
    traj.classes.push_back(cls);
  }
  m.trajectories.push_back(traj);
  return m;
}

}  // namespace

TEST_CASE("synthetic defaults give the 5:7 protocol split") {
  AttackDataset ds = generate_synthetic(SyntheticConfig{});
  CHECK(ds.entries.size() == 56);  // 2 classes x 28
  CHECK(ds.split_entries(Split::kTrain).size() == 40);
  CHECK(ds.split_entries(Split::kTest).size() == 16);
  CHECK(ds.class_ids() == std::vector<int>{0, 1});
  CHECK(ds.scenario == Scenario::kSynthetic);
  CHECK_NOTHROW(ds.validate());

  // 70 per class scales to the full 50/20 protocol.
  SyntheticConfig big;
  big.per_class = 70;
  AttackDataset ds70 = generate_synthetic(big);
  int train0 = 0, test0 = 0;
  for (const auto& e : ds70.entries)
    if (e.class_id == 0) (e.split == Split::kTrain ? train0 : test0)++;
  CHECK(train0 == 50);
  CHECK(test0 == 20);
}

TEST_CASE("synthetic generation is seed-deterministic") {
  SyntheticConfig cfg;
  cfg.seed = 42;
  AttackDataset a = generate_synthetic(cfg);
  AttackDataset b = generate_synthetic(cfg);
  REQUIRE(a.entries.size() == b.entries.size());
  for (size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(a.entries[i].image.values.data == b.entries[i].image.values.data);
    CHECK(a.entries[i].image_ref == b.entries[i].image_ref);
  }
  cfg.seed = 43;
  AttackDataset c = generate_synthetic(cfg);
  CHECK(a.entries[0].image.values.data != c.entries[0].image.values.data);
}

TEST_CASE("synthetic classes are visually separable and distinctly targeted") {
  SyntheticConfig cfg;
  cfg.classes = 4;
  AttackDataset ds = generate_synthetic(cfg);

  std::set<std::string> targets;
  for (const auto& [cls, target] : ds.targets) {
    CHECK(targets.insert(target).second);
    CHECK(tokenizer().contains(target));
  }
  CHECK(ds.targets.at(0) == "quartz");
  CHECK(ds.targets.at(1) == "raven");

  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) {
      std::vector<double> ma = class_mean_rgb(ds, a), mb = class_mean_rgb(ds, b);
      double dist = 0.0;
      for (int c = 0; c < 3; ++c) dist += (ma[c] - mb[c]) * (ma[c] - mb[c]);
      CHECK(std::sqrt(dist) > 0.05);
    }
}

TEST_CASE("multi-word targets stay inside the reserved word bank") {
  SyntheticConfig cfg;
  cfg.words_per_target = 2;
  cfg.classes = 3;
  AttackDataset ds = generate_synthetic(cfg);
  CHECK(ds.targets.at(0) == "quartz raven");
  CHECK(ds.targets.at(1) == "saddle tulip");
  CHECK(ds.targets.at(2) == "umbra violet");
  auto toks = ds.tokenized_targets(0);
  CHECK(toks.at(0) == std::vector<int>{17, 18, 0});

  SyntheticConfig too_many;
  too_many.classes = 5;
  too_many.words_per_target = 5;  // 25 > 24 available words
  CHECK_THROWS_AS(generate_synthetic(too_many), InputError);
}

TEST_CASE("protocol sampler draws 50/20 per class with complement targets") {
  ClassPool pool = make_synthetic_pool(10, 70, 16, 16, 7);
  AttackDataset ds = sample_imagenet_protocol(pool, 5, 11);
  CHECK(ds.scenario == Scenario::kImageNet);
  CHECK(ds.entries.size() == 350);
  CHECK(ds.split_entries(Split::kTrain).size() == 250);
  CHECK(ds.split_entries(Split::kTest).size() == 100);

  std::set<std::string> pool_names, used_refs;
  for (const auto& pc : pool.classes) pool_names.insert(pc.name);
  std::set<std::string> targets;
  for (const auto& [cls, target] : ds.targets) {
    CHECK(pool_names.count(target) == 1);
    CHECK(targets.insert(target).second);  // without replacement
  }
  for (const auto& e : ds.entries) {
    CHECK(used_refs.insert(e.image_ref).second);
    // A class's own pool name can never be its target.
    std::string own = e.image_ref.substr(5, e.image_ref.find('/', 5) - 5);
    CHECK(ds.targets.at(e.class_id) != own);
  }

  // Same seed, same sample; different seed differs somewhere.
  AttackDataset again = sample_imagenet_protocol(pool, 5, 11);
  CHECK(again.targets == ds.targets);
  CHECK(again.entries[0].image_ref == ds.entries[0].image_ref);

  CHECK_THROWS_AS(sample_imagenet_protocol(pool, 6, 1), InputError);
  ClassPool thin = make_synthetic_pool(10, 30, 8, 8, 1);
  CHECK_THROWS_AS(sample_imagenet_protocol(thin, 4, 1), InputError);
}

TEST_CASE("dataset validation rejects inconsistent inputs") {
  AttackDataset ds = generate_synthetic(SyntheticConfig{});

  AttackDataset no_target = ds;
  no_target.entries[0].class_id = 9;
  CHECK_THROWS_AS(no_target.validate(), InputError);

  AttackDataset dup = ds;
  dup.targets[1] = dup.targets[0];
  CHECK_THROWS_AS(dup.validate(), InputError);

  AttackDataset leak = ds;
  DatasetEntry crossover = leak.entries[0];  // a train entry
  crossover.split = Split::kTest;
  leak.entries.push_back(crossover);
  CHECK_THROWS_AS(leak.validate(), InputError);

  AttackDataset train_only = ds;
  for (auto& e : train_only.entries) e.split = Split::kTrain;
  CHECK_THROWS_AS(train_only.validate(), InputError);
  CHECK_NOTHROW(train_only.validate(/*require_test=*/false));

  AttackDataset empty;
  CHECK_THROWS_AS(empty.validate(), InputError);
}

TEST_CASE("scenario names round-trip and reject unknowns") {
  for (Scenario s : {Scenario::kSynthetic, Scenario::kImageNet,
                     Scenario::kAutoDriving, Scenario::kRoboTasking})
    CHECK(scenario_from_string(to_string(s)) == s);
  CHECK_THROWS_AS(scenario_from_string("Maritime"), SchemaError);
  CHECK(to_string(Split::kTrain) == "train");
  CHECK(to_string(Split::kTest) == "test");
}

TEST_CASE("manifest save/load round-trips byte-identically") {
  fs::path dir = scratch_dir();
  TrajectoryManifest m = small_manifest();
  fs::path p1 = dir / "manifest.json";
  fs::path p2 = dir / "manifest_again.json";
  save_manifest(m, p1.string());
  TrajectoryManifest loaded = load_manifest(p1.string());
  CHECK(loaded.prompt == m.prompt);
  CHECK(loaded.trajectories.size() == 1);
  CHECK(loaded.trajectories[0].classes[1].target == "raven");
  save_manifest(loaded, p2.string());
  CHECK(read_bytes(p1) == read_bytes(p2));
  fs::remove_all(dir);
}

TEST_CASE("manifest schema violations name the offending field") {
  using doctest::Contains;
  TrajectoryManifest bad_version = small_manifest();
  bad_version.schema_version = 2;
  CHECK_THROWS_WITH_AS(bad_version.validate(), Contains("schema_version"),
                       SchemaError);

  TrajectoryManifest wrong_count = small_manifest();
  wrong_count.trajectories[0].scenario = "AutoDriving";  // needs 5 classes
  CHECK_THROWS_WITH_AS(wrong_count.validate(),
                       Contains("trajectories[0].classes"), SchemaError);

  TrajectoryManifest bad_scenario = small_manifest();
  bad_scenario.trajectories[0].scenario = "Submarine";
  CHECK_THROWS_WITH_AS(bad_scenario.validate(), Contains("scenario"),
                       SchemaError);

  TrajectoryManifest short_refs = small_manifest();
  short_refs.trajectories[0].classes[0].image_refs.pop_back();
  CHECK_THROWS_WITH_AS(short_refs.validate(),
                       Contains("classes[0].image_refs"), SchemaError);

  TrajectoryManifest dup_target = small_manifest();
  dup_target.trajectories[0].classes[1].target = "quartz";
  CHECK_THROWS_WITH_AS(dup_target.validate(), Contains("target"), SchemaError);

  TrajectoryManifest dup_traj = small_manifest();
  ManifestTrajectory extra = dup_traj.trajectories[0];
  for (auto& cls : extra.classes) cls.class_id += 10;
  extra.classes[0].target = "saddle";
  extra.classes[1].target = "tulip";
  dup_traj.trajectories.push_back(extra);  // same trajectory_id
  CHECK_THROWS_WITH_AS(dup_traj.validate(), Contains("trajectory_id"),
                       SchemaError);

  fs::path dir = scratch_dir();
  fs::path p = dir / "missing_prompt.json";
  {
    std::ofstream out(p);
    out << "{\"schema_version\": 1, \"trajectories\": []}\n";
  }
  CHECK_THROWS_WITH_AS(load_manifest(p.string()), Contains("manifest.prompt"),
                       SchemaError);
  fs::path garbled = dir / "garbled.json";
  {
    std::ofstream out(garbled);
    out << "{not json";
  }
  CHECK_THROWS_AS(load_manifest(garbled.string()), SchemaError);
  CHECK_THROWS_AS(load_manifest((dir / "absent.json").string()), IoError);
  fs::remove_all(dir);
}

TEST_CASE("trajectory dataset loads images with the first five as train") {
  fs::path dir = scratch_dir();
  fs::create_directories(dir / "images");
  TrajectoryManifest m = small_manifest();
  for (const auto& traj : m.trajectories)
    for (const auto& cls : traj.classes)
      for (size_t i = 0; i < cls.image_refs.size(); ++i) {
        ImageTensor img(3, 6, 8, 0.1 * (cls.class_id + 1));
        img.values.at(0, 0, 0) = i / 16.0;  // distinct per image
        save_ppm(img, (dir / cls.image_refs[i]).string());
      }
  fs::path mpath = dir / "manifest.json";
  save_manifest(m, mpath.string());

  AttackDataset ds = load_rist_manifest(mpath.string());
  CHECK(ds.scenario == Scenario::kRoboTasking);
  CHECK(ds.entries.size() == 20);
  CHECK(ds.targets.at(0) == "quartz");
  for (const auto& e : ds.entries) {
    CHECK(e.trajectory_id == "traj0");
    CHECK(e.prompt == "describe this image");
    CHECK(e.image.height() == 6);
    CHECK(e.image.width() == 8);
  }
  int idx = 0;
  for (const auto& e : ds.entries) {
    CHECK(e.split == ((idx % 10) < 5 ? Split::kTrain : Split::kTest));
    ++idx;
  }
  fs::remove_all(dir);
}

TEST_CASE("bilinear resize matches the hand-computed 2x2 -> 4x4 oracle") {
  ImageTensor src(1, 2, 2);
  src.values.at(0, 0, 0) = 0.0;
  src.values.at(0, 0, 1) = 1.0;
  src.values.at(0, 1, 0) = 1.0;
  src.values.at(0, 1, 1) = 0.0;

  ImageTensor out = resize_to_model(src, 4, 4);
  const double expected[4][4] = {{0.0, 0.25, 0.75, 1.0},
                                 {0.25, 0.375, 0.625, 0.75},
                                 {0.75, 0.625, 0.375, 0.25},
                                 {1.0, 0.75, 0.25, 0.0}};
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      CHECK(out.values.at(0, y, x) ==
            doctest::Approx(expected[y][x]).epsilon(1e-12));
}

TEST_CASE("resize preserves constants and is identity at equal size") {
  ImageTensor flat(3, 5, 7, 0.42);
  ImageTensor up = resize_to_model(flat, 13, 11);
  for (double v : up.values.data)
    CHECK(v == doctest::Approx(0.42).epsilon(1e-12));

  SyntheticConfig cfg;
  cfg.per_class = 2;
  AttackDataset ds = generate_synthetic(cfg);
  const ImageTensor& img = ds.entries[0].image;
  ImageTensor same = resize_to_model(img, img.height(), img.width());
  CHECK(same.values.data == img.values.data);

  ImageTensor down = resize_to_model(img, 8, 8);
  CHECK(down.height() == 8);
  for (double v : down.values.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS_AS(resize_to_model(img, 0, 8), InputError);
}

TEST_CASE("PPM round trip equals 8-bit quantization") {
  fs::path dir = scratch_dir();
  fs::path p = dir / "img.ppm";
  SyntheticConfig cfg;
  cfg.per_class = 2;
  cfg.height = 9;
  cfg.width = 13;
  AttackDataset ds = generate_synthetic(cfg);
  const ImageTensor& img = ds.entries[0].image;

  save_ppm(img, p.string());
  ImageTensor back = load_ppm(p.string());
  ImageTensor quantized = quantize_to_8bit(img);
  REQUIRE(back.values.data.size() == quantized.values.data.size());
  for (size_t i = 0; i < back.values.data.size(); ++i)
    CHECK(back.values.data[i] == quantized.values.data[i]);

  // Round trip of an already-quantized image is exact.
  save_ppm(back, p.string());
  ImageTensor twice = load_ppm(p.string());
  CHECK(twice.values.data == back.values.data);
  fs::remove_all(dir);
}

TEST_CASE("PPM parser handles comments and rejects malformed files") {
  fs::path dir = scratch_dir();
  fs::path ok = dir / "ok.ppm";
  {
    std::ofstream out(ok, std::ios::binary);
    out << "P6\n# a comment\n2 1\n# another\n255\n";
    unsigned char px[6] = {255, 0, 0, 0, 255, 0};
    out.write(reinterpret_cast<char*>(px), 6);
  }
  ImageTensor img = load_ppm(ok.string());
  CHECK(img.width() == 2);
  CHECK(img.height() == 1);
  CHECK(img.values.at(0, 0, 0) == 1.0);
  CHECK(img.values.at(1, 0, 1) == 1.0);

  fs::path bad_magic = dir / "bad_magic.ppm";
  {
    std::ofstream out(bad_magic, std::ios::binary);
    out << "P5\n2 1\n255\n xx";
  }
  CHECK_THROWS_AS(load_ppm(bad_magic.string()), SchemaError);

  fs::path bad_maxval = dir / "bad_maxval.ppm";
  {
    std::ofstream out(bad_maxval, std::ios::binary);
    out << "P6\n2 1\n65535\n";
  }
  CHECK_THROWS_AS(load_ppm(bad_maxval.string()), SchemaError);

  fs::path truncated = dir / "truncated.ppm";
  {
    std::ofstream out(truncated, std::ios::binary);
    out << "P6\n2 2\n255\n";
    unsigned char px[3] = {1, 2, 3};
    out.write(reinterpret_cast<char*>(px), 3);
  }
  CHECK_THROWS_AS(load_ppm(truncated.string()), SchemaError);
  CHECK_THROWS_AS(load_ppm((dir / "absent.ppm").string()), IoError);
  fs::remove_all(dir);
}
