#include "saup/datakit.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "saup/fsio.hpp"
#include "saup/rng.hpp"
#include "saup/tokenizer.hpp"

namespace saup {

using nlohmann::json;

Scenario scenario_from_string(const std::string& name) {
  if (name == "Synthetic") return Scenario::kSynthetic;
  if (name == "ImageNet") return Scenario::kImageNet;
  if (name == "AutoDriving") return Scenario::kAutoDriving;
  if (name == "RoboTasking") return Scenario::kRoboTasking;
  throw SchemaError("unknown scenario '" + name + "'");
}

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::kSynthetic: return "Synthetic";
    case Scenario::kImageNet: return "ImageNet";
    case Scenario::kAutoDriving: return "AutoDriving";
    case Scenario::kRoboTasking: return "RoboTasking";
  }
  throw SpecError("unreachable scenario");
}

std::string to_string(Split s) {
  return s == Split::kTrain ? "train" : "test";
}

void AttackDataset::validate(bool require_test) const {
  if (entries.empty()) throw InputError("dataset has no entries");
  std::map<int, int> train_count, test_count;
  std::set<std::string> train_refs, test_refs;
  for (const auto& e : entries) {
    if (!targets.count(e.class_id))
      throw InputError("class " + std::to_string(e.class_id) +
                       " has entries but no target");
    if (e.split == Split::kTrain) {
      ++train_count[e.class_id];
      train_refs.insert(e.image_ref);
    } else {
      ++test_count[e.class_id];
      test_refs.insert(e.image_ref);
    }
  }
  for (const auto& [cls, target] : targets) {
    if (train_count[cls] < 1)
      throw InputError("class " + std::to_string(cls) + " has no train entry");
    if (require_test && test_count[cls] < 1)
      throw InputError("class " + std::to_string(cls) + " has no test entry");
  }
  for (const auto& ref : train_refs)
    if (test_refs.count(ref))
      throw InputError("image '" + ref + "' appears in both splits");
  std::set<std::string> seen;
  for (const auto& [cls, target] : targets)
    if (!seen.insert(target).second)
      throw InputError("target '" + target + "' assigned to multiple classes");
}

std::vector<int> AttackDataset::class_ids() const {
  std::vector<int> ids;
  for (const auto& [cls, target] : targets) ids.push_back(cls);
  return ids;  // std::map iteration is already sorted
}

std::vector<const DatasetEntry*> AttackDataset::split_entries(Split split) const {
  std::vector<const DatasetEntry*> out;
  for (const auto& e : entries)
    if (e.split == split) out.push_back(&e);
  return out;
}

std::map<int, std::vector<int>> AttackDataset::tokenized_targets(
    int eos_id) const {
  std::map<int, std::vector<int>> out;
  for (const auto& [cls, target] : targets) {
    std::vector<int> ids = tokenizer().encode(target);
    if (ids.empty())
      throw InputError("class " + std::to_string(cls) + " target is empty");
    ids.push_back(eos_id);
    out[cls] = ids;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic images

namespace {

// Vocabulary slices (see tokenizer.cpp): class words 1..16, targets 17..40.
constexpr int kClassWordBase = 1;
constexpr int kClassWordCount = 16;
constexpr int kTargetWordBase = 17;
constexpr int kTargetWordCount = 24;

void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
  h = h - std::floor(h);
  double f = h * 6.0;
  int i = static_cast<int>(std::floor(f)) % 6;
  f -= std::floor(f);
  double p = v * (1.0 - s);
  double q = v * (1.0 - f * s);
  double t = v * (1.0 - (1.0 - f) * s);
  switch (i) {
    case 0: rgb[0] = v; rgb[1] = t; rgb[2] = p; break;
    case 1: rgb[0] = q; rgb[1] = v; rgb[2] = p; break;
    case 2: rgb[0] = p; rgb[1] = v; rgb[2] = t; break;
    case 3: rgb[0] = p; rgb[1] = q; rgb[2] = v; break;
    case 4: rgb[0] = t; rgb[1] = p; rgb[2] = v; break;
    default: rgb[0] = v; rgb[1] = p; rgb[2] = t; break;
  }
}

// One procedural image: class-specific hue + stripe/checker/ring pattern,
// per-image phase, brightness jitter, and pixel noise.
ImageTensor synthetic_image(int class_index, int height, int width, Rng& rng) {
  double hue = std::fmod(0.137 + class_index * 0.618034, 1.0);
  int pattern = class_index % 4;
  int period = 4 + 2 * (class_index % 3);
  int half = period / 2;
  int phase = static_cast<int>(rng.below(static_cast<uint64_t>(period)));
  double brightness = rng.uniform(-0.08, 0.08);
  double cy = (height - 1) / 2.0, cx = (width - 1) / 2.0;

  ImageTensor img(3, height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      bool on = false;
      switch (pattern) {
        case 0: on = (y + phase) % period < half; break;
        case 1: on = (x + phase) % period < half; break;
        case 2: on = ((x + phase) / half + (y + phase) / half) % 2 == 0; break;
        default: {
          int r = static_cast<int>(
              std::lround(std::hypot(y - cy, x - cx)));
          on = (r + phase) % period < half;
          break;
        }
      }
      double v = 0.60 + (on ? 0.18 : -0.12) + brightness;
      double rgb[3];
      hsv_to_rgb(hue, 0.65, std::clamp(v, 0.0, 1.0), rgb);
      for (int c = 0; c < 3; ++c)
        img.values.at(c, y, x) =
            std::clamp(rgb[c] + rng.uniform(-0.08, 0.08), 0.0, 1.0);
    }
  return img;
}

int protocol_train_count(int per_class) {
  if (per_class < 2)
    throw InputError("per_class must be >= 2 to populate both splits");
  int train = static_cast<int>(std::lround(per_class * 5.0 / 7.0));
  return std::clamp(train, 1, per_class - 1);
}

}  // namespace

AttackDataset generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.classes < 1) throw InputError("classes must be >= 1");
  if (cfg.height < 1 || cfg.width < 1)
    throw InputError("image size must be positive");
  if (cfg.words_per_target < 1)
    throw InputError("words_per_target must be >= 1");
  if (cfg.classes * cfg.words_per_target > kTargetWordCount)
    throw InputError("not enough distinct target words for " +
                     std::to_string(cfg.classes) + " classes x " +
                     std::to_string(cfg.words_per_target) + " words");
  int train = protocol_train_count(cfg.per_class);

  AttackDataset ds;
  ds.scenario = Scenario::kSynthetic;
  Rng rng(cfg.seed);
  const Tokenizer& tok = tokenizer();
  for (int c = 0; c < cfg.classes; ++c) {
    std::string target;
    for (int w = 0; w < cfg.words_per_target; ++w) {
      if (w) target += ' ';
      target += tok.word(kTargetWordBase + c * cfg.words_per_target + w);
    }
    ds.targets[c] = target;
    for (int i = 0; i < cfg.per_class; ++i) {
      DatasetEntry e;
      e.prompt = cfg.prompt;
      e.image_ref = "synthetic/class" + std::to_string(c) + "/img" +
                    std::to_string(i);
      e.image = synthetic_image(c, cfg.height, cfg.width, rng);
      e.class_id = c;
      e.split = i < train ? Split::kTrain : Split::kTest;
      ds.entries.push_back(std::move(e));
    }
  }
  ds.validate();
  return ds;
}

ClassPool make_synthetic_pool(int pool_classes, int per_class, int height,
                              int width, uint64_t seed) {
  if (pool_classes < 1 || pool_classes > kClassWordCount)
    throw InputError("pool_classes must be in [1," +
                     std::to_string(kClassWordCount) + "]");
  ClassPool pool;
  Rng rng(seed);
  const Tokenizer& tok = tokenizer();
  for (int c = 0; c < pool_classes; ++c) {
    ClassPool::PoolClass pc;
    pc.name = tok.word(kClassWordBase + c);
    for (int i = 0; i < per_class; ++i) {
      pc.image_refs.push_back("pool/" + pc.name + "/img" + std::to_string(i));
      pc.images.push_back(synthetic_image(c, height, width, rng));
    }
    pool.classes.push_back(std::move(pc));
  }
  return pool;
}

AttackDataset sample_imagenet_protocol(const ClassPool& pool, int num_classes,
                                       uint64_t seed,
                                       const std::string& prompt) {
  constexpr int kTrain = 50, kTest = 20;
  if (num_classes < 1) throw InputError("num_classes must be >= 1");
  int pool_size = static_cast<int>(pool.classes.size());
  if (pool_size < num_classes)
    throw InputError("pool has " + std::to_string(pool_size) +
                     " classes, need " + std::to_string(num_classes));
  if (pool_size < 2 * num_classes)
    throw InputError("pool must keep >= " + std::to_string(num_classes) +
                     " classes outside the selection so each chosen class "
                     "gets a distinct target name");

  Rng rng(seed);
  std::vector<int> order(pool_size);
  for (int i = 0; i < pool_size; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<int> chosen(order.begin(), order.begin() + num_classes);
  std::vector<int> complement(order.begin() + num_classes, order.end());
  rng.shuffle(complement);  // targets drawn without replacement

  AttackDataset ds;
  ds.scenario = Scenario::kImageNet;
  for (int k = 0; k < num_classes; ++k) {
    const auto& pc = pool.classes[chosen[k]];
    int available = static_cast<int>(pc.images.size());
    if (available < kTrain + kTest)
      throw InputError("pool class '" + pc.name + "' has " +
                       std::to_string(available) + " images, need " +
                       std::to_string(kTrain + kTest));
    std::vector<int> pick(available);
    for (int i = 0; i < available; ++i) pick[i] = i;
    rng.shuffle(pick);
    for (int i = 0; i < kTrain + kTest; ++i) {
      DatasetEntry e;
      e.prompt = prompt;
      e.image_ref = pc.image_refs[pick[i]];
      e.image = pc.images[pick[i]];
      e.class_id = k;
      e.split = i < kTrain ? Split::kTrain : Split::kTest;
      ds.entries.push_back(std::move(e));
    }
    ds.targets[k] = pool.classes[complement[k]].name;
  }
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Trajectory manifests

namespace {

int expected_class_count(const std::string& scenario, const std::string& where) {
  if (scenario == "AutoDriving") return 5;
  if (scenario == "RoboTasking") return 2;
  throw SchemaError(where + ".scenario: '" + scenario +
                    "' is not AutoDriving or RoboTasking");
}

const json& require_field(const json& obj, const char* key,
                          const std::string& where) {
  if (!obj.is_object())
    throw SchemaError(where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end())
    throw SchemaError(where + "." + key + ": missing");
  return *it;
}

}  // namespace

void TrajectoryManifest::validate() const {
  if (schema_version != 1)
    throw SchemaError("schema_version: expected 1, got " +
                      std::to_string(schema_version));
  if (trajectories.empty()) throw SchemaError("trajectories: empty");
  std::set<std::string> traj_ids;
  std::set<int> class_ids;
  std::set<std::string> targets;
  const std::string& scenario0 = trajectories.front().scenario;
  for (size_t t = 0; t < trajectories.size(); ++t) {
    std::string where = "trajectories[" + std::to_string(t) + "]";
    const auto& traj = trajectories[t];
    if (traj.trajectory_id.empty())
      throw SchemaError(where + ".trajectory_id: empty");
    if (!traj_ids.insert(traj.trajectory_id).second)
      throw SchemaError(where + ".trajectory_id: duplicate '" +
                        traj.trajectory_id + "'");
    int expected = expected_class_count(traj.scenario, where);
    if (traj.scenario != scenario0)
      throw SchemaError(where + ".scenario: manifests must not mix scenarios");
    if (static_cast<int>(traj.classes.size()) != expected)
      throw SchemaError(where + ".classes: " + traj.scenario + " needs " +
                        std::to_string(expected) + " classes, got " +
                        std::to_string(traj.classes.size()));
    for (size_t c = 0; c < traj.classes.size(); ++c) {
      std::string cwhere = where + ".classes[" + std::to_string(c) + "]";
      const auto& cls = traj.classes[c];
      if (!class_ids.insert(cls.class_id).second)
        throw SchemaError(cwhere + ".class_id: duplicate " +
                          std::to_string(cls.class_id));
      if (cls.target.empty())
        throw SchemaError(cwhere + ".target: empty");
      if (!targets.insert(cls.target).second)
        throw SchemaError(cwhere + ".target: duplicate '" + cls.target + "'");
      if (cls.image_refs.size() != 10)
        throw SchemaError(cwhere + ".image_refs: expected 10 entries, got " +
                          std::to_string(cls.image_refs.size()));
      std::set<std::string> refs(cls.image_refs.begin(), cls.image_refs.end());
      if (refs.size() != cls.image_refs.size())
        throw SchemaError(cwhere + ".image_refs: duplicate reference");
    }
  }
}

TrajectoryManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("manifest '" + path + "': " + e.what());
  }

  TrajectoryManifest m;
  m.schema_version = require_field(doc, "schema_version", "manifest").get<int>();
  m.prompt = require_field(doc, "prompt", "manifest").get<std::string>();
  const json& trajs = require_field(doc, "trajectories", "manifest");
  if (!trajs.is_array()) throw SchemaError("trajectories: expected an array");
  for (size_t t = 0; t < trajs.size(); ++t) {
    std::string where = "trajectories[" + std::to_string(t) + "]";
    const json& jt = trajs[t];
    ManifestTrajectory traj;
    traj.trajectory_id =
        require_field(jt, "trajectory_id", where).get<std::string>();
    traj.scenario = require_field(jt, "scenario", where).get<std::string>();
    const json& classes = require_field(jt, "classes", where);
    if (!classes.is_array())
      throw SchemaError(where + ".classes: expected an array");
    for (size_t c = 0; c < classes.size(); ++c) {
      std::string cwhere = where + ".classes[" + std::to_string(c) + "]";
      const json& jc = classes[c];
      ManifestClass cls;
      cls.class_id = require_field(jc, "class_id", cwhere).get<int>();
      cls.target = require_field(jc, "target", cwhere).get<std::string>();
      const json& refs = require_field(jc, "image_refs", cwhere);
      if (!refs.is_array())
        throw SchemaError(cwhere + ".image_refs: expected an array");
      for (const auto& r : refs) cls.image_refs.push_back(r.get<std::string>());
      traj.classes.push_back(std::move(cls));
    }
    m.trajectories.push_back(std::move(traj));
  }
  m.validate();
  return m;
}

void save_manifest(const TrajectoryManifest& manifest, const std::string& path) {
  manifest.validate();
  json doc;
  doc["schema_version"] = manifest.schema_version;
  doc["prompt"] = manifest.prompt;
  json trajs = json::array();
  for (const auto& traj : manifest.trajectories) {
    json jt;
    jt["trajectory_id"] = traj.trajectory_id;
    jt["scenario"] = traj.scenario;
    json classes = json::array();
    for (const auto& cls : traj.classes) {
      json jc;
      jc["class_id"] = cls.class_id;
      jc["target"] = cls.target;
      jc["image_refs"] = cls.image_refs;
      classes.push_back(std::move(jc));
    }
    jt["classes"] = std::move(classes);
    trajs.push_back(std::move(jt));
  }
  doc["trajectories"] = std::move(trajs);
  atomic_write(path, doc.dump(2) + '\n');
}

AttackDataset load_rist_manifest(const std::string& path) {
  TrajectoryManifest m = load_manifest(path);
  std::filesystem::path base = std::filesystem::path(path).parent_path();

  AttackDataset ds;
  ds.scenario = scenario_from_string(m.trajectories.front().scenario);
  for (const auto& traj : m.trajectories)
    for (const auto& cls : traj.classes) {
      ds.targets[cls.class_id] = cls.target;
      for (size_t i = 0; i < cls.image_refs.size(); ++i) {
        DatasetEntry e;
        e.prompt = m.prompt;
        e.image_ref = cls.image_refs[i];
        e.image = load_ppm((base / cls.image_refs[i]).string());
        e.class_id = cls.class_id;
        e.split = i < 5 ? Split::kTrain : Split::kTest;
        e.trajectory_id = traj.trajectory_id;
        ds.entries.push_back(std::move(e));
      }
    }
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Image plumbing

ImageTensor resize_to_model(const ImageTensor& image, int height, int width) {
  image.validate();
  if (height < 1 || width < 1)
    throw InputError("resize target must be positive");
  const Tensor3& src = image.values;
  if (src.height == height && src.width == width) return image;

  ImageTensor out(src.channels, height, width);
  for (int y = 0; y < height; ++y) {
    double sy = (y + 0.5) * src.height / height - 0.5;
    sy = std::clamp(sy, 0.0, static_cast<double>(src.height - 1));
    int y0 = static_cast<int>(std::floor(sy));
    int y1 = std::min(y0 + 1, src.height - 1);
    double fy = sy - y0;
    for (int x = 0; x < width; ++x) {
      double sx = (x + 0.5) * src.width / width - 0.5;
      sx = std::clamp(sx, 0.0, static_cast<double>(src.width - 1));
      int x0 = static_cast<int>(std::floor(sx));
      int x1 = std::min(x0 + 1, src.width - 1);
      double fx = sx - x0;
      for (int c = 0; c < src.channels; ++c) {
        double top = (1 - fx) * src.at(c, y0, x0) + fx * src.at(c, y0, x1);
        double bot = (1 - fx) * src.at(c, y1, x0) + fx * src.at(c, y1, x1);
        out.values.at(c, y, x) = (1 - fy) * top + fy * bot;
      }
    }
  }
  return out;
}

namespace {

int next_ppm_token(std::istream& in) {
  // Skips whitespace and '#' comments, then parses one integer.
  for (;;) {
    int ch = in.peek();
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
  int value = -1;
  in >> value;
  if (!in) throw SchemaError("PPM header: expected an integer");
  return value;
}

}  // namespace

ImageTensor load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image '" + path + "'");
  char m0 = 0, m1 = 0;
  in.get(m0).get(m1);
  if (m0 != 'P' || m1 != '6')
    throw SchemaError("'" + path + "' is not a binary PPM (P6)");
  int width = next_ppm_token(in);
  int height = next_ppm_token(in);
  int maxval = next_ppm_token(in);
  if (width < 1 || height < 1)
    throw SchemaError("'" + path + "': bad dimensions");
  if (maxval != 255)
    throw SchemaError("'" + path + "': only maxval 255 supported, got " +
                      std::to_string(maxval));
  in.get();  // the single whitespace after maxval

  std::vector<unsigned char> raw(static_cast<size_t>(width) * height * 3);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (static_cast<size_t>(in.gcount()) != raw.size())
    throw SchemaError("'" + path + "': truncated pixel data");

  ImageTensor img(3, height, width);
  size_t i = 0;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c)
        img.values.at(c, y, x) = raw[i++] / 255.0;
  return img;
}

void save_ppm(const ImageTensor& image, const std::string& path) {
  image.validate();
  if (image.channels() != 3)
    throw InputError("PPM output needs 3 channels, got " +
                     std::to_string(image.channels()));
  std::string blob = "P6\n" + std::to_string(image.width()) + ' ' +
                     std::to_string(image.height()) + "\n255\n";
  blob.reserve(blob.size() + static_cast<size_t>(image.width()) * image.height() * 3);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < 3; ++c)
        blob.push_back(static_cast<char>(static_cast<unsigned char>(
            std::lround(image.values.at(c, y, x) * 255.0))));
  atomic_write(path, blob);
}

}  // namespace saup
